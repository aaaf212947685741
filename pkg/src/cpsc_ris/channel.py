"""Block-fading Nakagami-m multipath links and the equivalent CIR.

Each tap is drawn from the Gaussian approximation of a complex Nakagami-m
gain: real and imaginary parts are independent normals with means
``(1 - 1/m)**0.25 * sqrt(Omega) * (cos(phi), sin(phi))`` and common variance
``Omega_s / 2`` where ``Omega_s = Omega * (1 - sqrt(1 - 1/m))``. The same
model feeds the closed-form error analysis, so simulation and bound share
one channel law.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import ConfigurationError


@dataclass(frozen=True)
class NakagamiTapParams:
    m: int
    omega: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"fading parameter m must be an integer >= 1, got {self.m}")
        if not self.omega > 0:
            raise ValueError(f"spreading parameter omega must be > 0, got {self.omega}")

    @property
    def los_fraction(self):
        """Share of the tap power carried by the mean, ``sqrt(1 - 1/m)``."""
        return np.sqrt(1.0 - 1.0 / self.m)

    @property
    def omega_s(self):
        return self.omega * (1.0 - self.los_fraction)

    def mean(self, phi=0.0):
        """Complex mean ``mu_X + j mu_Y``."""
        return np.sqrt(self.los_fraction) * np.sqrt(self.omega) * np.exp(1j * phi)


def pdp_weights(taps, decay):
    """Exponentially decaying power-delay profile normalised to unit sum."""
    taps = int(taps)
    if taps < 1:
        raise ValueError("taps must be >= 1")
    if decay < 0:
        raise ValueError("decay must be >= 0")
    w = np.exp(-float(decay) * np.arange(taps))
    return w / w.sum()


def sample_tap(params, phi, rng, size=None):
    """Draw complex gain(s) for one tap under the Gaussian approximation."""
    sigma = np.sqrt(params.omega_s / 2.0)
    mu = params.mean(phi)
    z = rng.standard_normal(size=(2,) if size is None else (2, *np.atleast_1d(size)))
    g = (mu.real + sigma * z[0]) + 1j * (mu.imag + sigma * z[1])
    return complex(g) if size is None else g


def link_tap_params(config):
    """Per-link lists of :class:`NakagamiTapParams` with path loss applied.

    Direct link power is ``D0**-a0 * pdp(l)``. A reflected link through a
    group of ``N_G`` co-phased elements is assumed to combine coherently,
    giving ``N_G**2 * D1**-a1 * D2**-a2 * pdp(l)``.
    """
    direct = config.D0 ** -config.pl_exp_direct
    cascaded = config.N_G**2 * config.D1 ** -config.pl_exp_tx_ris * config.D2 ** -config.pl_exp_ris_rx
    out = []
    for r, (taps, m) in enumerate(zip(config.link_taps, config.link_m)):
        gain = direct if r == 0 else cascaded
        out.append([NakagamiTapParams(m, gain * w) for w in pdp_weights(taps, config.pdp_decay)])
    return out


def core_tap_params(config):
    """Flattened tap parameters in link order (the ``L_s`` core taps)."""
    return [p for link in link_tap_params(config) for p in link]


def draw_core_taps(config, rng, size):
    """Draw ``size`` independent realisations of the stacked core taps.

    Returns an array ``(size, L_s)``: ``[g_0; g_1; ...; g_R]`` per row.
    Every tap gets its own uniform phase parameter.
    """
    params = core_tap_params(config)
    omega = np.array([p.omega for p in params])
    omega_s = np.array([p.omega_s for p in params])
    amp = np.sqrt(np.array([p.los_fraction for p in params]) * omega)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=(size, len(params)))
    z = rng.standard_normal(size=(2, size, len(params)))
    sigma = np.sqrt(omega_s / 2.0)
    return amp * np.exp(1j * phi) + sigma * (z[0] + 1j * z[1])


@dataclass(frozen=True)
class FadingRealization:
    links: tuple
    draw_id: int = 0

    @property
    def core(self):
        return np.concatenate(self.links)


def generate_realization(config, rng, draw_id=0):
    """One block-fading draw of every link ``g_0 .. g_R``."""
    core = draw_core_taps(config, rng, 1)[0]
    bounds = np.cumsum((0,) + config.link_taps)
    links = tuple(core[bounds[i] : bounds[i + 1]].copy() for i in range(config.n_links))
    return FadingRealization(links=links, draw_id=draw_id)


@dataclass(frozen=True)
class EquivalentCir:
    g_eq: np.ndarray
    g_eq_core: np.ndarray
    core_positions: np.ndarray
    k: tuple


def identity_permutation(R):
    return tuple(range(1, R + 1))


def core_positions(config, k=None):
    """Indices of ``g_eq`` occupied by the stacked core taps.

    Link 0 starts at offset 0 and reflected link ``r`` at ``k_r * delta``.
    """
    R = config.R
    k = identity_permutation(R) if k is None else tuple(int(v) for v in k)
    if sorted(k) != list(range(1, R + 1)):
        raise ValueError(f"k must be a permutation of 1..{R}, got {k}")
    _check_delays(config)
    offsets = (0,) + tuple(kr * config.delta for kr in k)
    pos = np.concatenate([off + np.arange(t) for off, t in zip(offsets, config.link_taps)])
    return pos.astype(np.intp)


def _check_delays(config):
    if config.R == 0:
        if config.link_taps[0] > config.N:
            raise ConfigurationError("direct link longer than the block")
        return
    if not config.L <= config.delta:
        raise ConfigurationError(f"L <= delta violated: L={config.L}, delta={config.delta}")
    if not config.delta <= config.N // (config.R + 1):
        raise ConfigurationError(
            f"delta <= floor(N/(R+1)) violated: delta={config.delta}, N={config.N}, R={config.R}"
        )


def scatter_core(core, positions, N):
    """Place stacked core taps ``(..., L_s)`` into length-``N`` CIRs."""
    core = np.asarray(core, dtype=np.complex128)
    g = np.zeros(core.shape[:-1] + (N,), dtype=np.complex128)
    g[..., positions] = core
    return g


def assemble_equivalent_cir(realization, k, config):
    """Build ``g_eq`` for delay permutation ``k`` (``None`` = identity)."""
    k = identity_permutation(config.R) if k is None else tuple(int(v) for v in k)
    pos = core_positions(config, k)
    core = realization.core
    if core.shape[0] != config.L_s:
        raise ValueError(f"realization has {core.shape[0]} taps, config expects {config.L_s}")
    return EquivalentCir(
        g_eq=scatter_core(core, pos, config.N),
        g_eq_core=core.copy(),
        core_positions=pos,
        k=k,
    )


def permutation_matrix(config, k_from, k_to):
    """Permutation matrix ``P`` with ``P @ g_eq(k_from) == g_eq(k_to)``."""
    src = core_positions(config, k_from)
    dst = core_positions(config, k_to)
    N = config.N
    perm = np.full(N, -1)
    perm[dst] = src
    free_dst = np.setdiff1d(np.arange(N), dst)
    free_src = np.setdiff1d(np.arange(N), src)
    perm[free_dst] = free_src
    P = np.zeros((N, N))
    P[np.arange(N), perm] = 1.0
    return P
