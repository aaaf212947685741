"""Block detectors for CPSC-RIS and its index-modulation extension.

All kernels take batches: ``y`` of shape ``(..., N)`` and a matching channel
batch. Exhaustive searches evaluate candidates in a fixed lexicographic
order and keep the first minimiser, so results do not depend on chunking.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import CapacityError, SingularityError, check_noise_power, check_psk_order, check_vector
from .channel import FadingRealization, core_positions, scatter_core
from .numerics import cir
from .transceiver import (
    PermutationCode,
    anchor_vector,
    constellation,
    psk_demodulate,
    psk_slice,
    psk_slice_indices,
)

SEARCH_GUARD = 2**20
ZF_FADE_TOL = 1e-12


@dataclass
class DetectionResult:
    """Decisions for a batch of blocks.

    ``x_hat`` holds the detected data symbols (anchor already removed),
    ``k_hat`` the detected permutation index into the code table (IM only),
    ``metric`` the decision statistic and ``n_candidates`` how many
    hypotheses each block was scored against.
    """

    x_hat: np.ndarray
    metric: np.ndarray
    detector_id: str
    k_hat: np.ndarray | None = None
    n_candidates: int = 0
    x_soft: np.ndarray | None = None


def candidate_blocks(N, M):
    """All ``M**N`` PSK blocks, lexicographic in the phase indices."""
    M = check_psk_order(M)
    if M**N > SEARCH_GUARD:
        raise CapacityError(f"M**N = {M}**{N} candidates exceed the 2**20 search guard")
    idx = np.array(list(product(range(M), repeat=N)), dtype=np.int64).reshape(-1, N)
    return constellation(M)[idx]


def _search(y, G, C, chunk):
    """Running argmin of ``||y - G c||^2`` over candidate rows ``C``.

    ``y`` is ``(B, N)``, ``G`` is ``(B, N, N)``. Returns indices and metrics.
    """
    best = np.full(y.shape[0], np.inf)
    arg = np.zeros(y.shape[0], dtype=np.int64)
    for s in range(0, C.shape[0], chunk):
        pred = G @ C[s : s + chunk].T  # (B, N, K)
        met = np.sum(np.abs(y[:, :, None] - pred) ** 2, axis=1)
        i = np.argmin(met, axis=1)
        m = met[np.arange(y.shape[0]), i]
        better = m < best
        best = np.where(better, m, best)
        arg = np.where(better, i + s, arg)
    return arg, best


def _as_batch(y, g):
    y = check_vector(y, "y", allow_batch=True)
    g = check_vector(g, "g", allow_batch=True)
    if y.shape[-1] != g.shape[-1]:
        raise ValueError(f"y has length {y.shape[-1]} but the CIR has length {g.shape[-1]}")
    shape = np.broadcast_shapes(y.shape, g.shape)
    N = shape[-1]
    return (
        np.broadcast_to(y, shape).reshape(-1, N),
        np.broadcast_to(g, shape).reshape(-1, N),
        shape[:-1],
    )


def ml_detect(y, g_eq, M, chunk=1024):
    """Exhaustive ML detection ``argmin_x ||y - cir(x) g_eq||^2``.

    ``g_eq`` may be the true or the estimated CIR.
    """
    yb, gb, lead = _as_batch(y, g_eq)
    N = yb.shape[-1]
    C = candidate_blocks(N, M)
    arg, best = _search(yb, cir(gb), C, chunk)
    return DetectionResult(
        x_hat=C[arg].reshape(lead + (N,)),
        metric=best.reshape(lead),
        detector_id="ML",
        n_candidates=C.shape[0],
    )


def equalizer_taps(g_eq, N0, mode="MMSE"):
    """Single-tap weights ``conj(lam) / (|lam|^2 + c N0)`` per frequency bin."""
    if mode not in ("ZF", "MMSE"):
        raise ValueError(f"mode must be 'ZF' or 'MMSE', got {mode!r}")
    lam = np.fft.fft(np.asarray(g_eq, dtype=np.complex128), axis=-1)
    power = np.abs(lam) ** 2
    if mode == "ZF":
        if np.min(np.abs(lam)) < ZF_FADE_TOL:
            raise SingularityError("ZF equalizer hit a spectral null of the channel")
        return lam.conj() / power
    return lam.conj() / (power + check_noise_power(N0))


def fd_equalize(y, g_eq, N0, mode="MMSE", M=2):
    """Frequency-domain ZF/MMSE equalization followed by per-symbol PSK slicing."""
    yb, gb, lead = _as_batch(y, g_eq)
    soft = np.fft.ifft(equalizer_taps(gb, N0, mode) * np.fft.fft(yb, axis=-1), axis=-1)
    x_hat = psk_slice(soft, M)
    metric = np.sum(np.abs(soft - x_hat) ** 2, axis=-1)
    N = yb.shape[-1]
    return DetectionResult(
        x_hat=x_hat.reshape(lead + (N,)),
        metric=metric.reshape(lead),
        detector_id=mode,
        n_candidates=0,
        x_soft=soft.reshape(lead + (N,)),
    )


# --- index modulation -----------------------------------------------------------


def _im_setup(y, core, config, code, anchor):
    if isinstance(core, FadingRealization):
        core = core.core
    core = check_vector(core, "core taps", allow_batch=True)
    if core.shape[-1] != config.L_s:
        raise ValueError(f"expected {config.L_s} core taps, got {core.shape[-1]}")
    y = check_vector(y, "y", allow_batch=True)
    if y.shape[-1] != config.N:
        raise ValueError(f"y has length {y.shape[-1]}, expected N={config.N}")
    lead = np.broadcast_shapes(y.shape[:-1], core.shape[:-1])
    yb = np.broadcast_to(y, lead + (config.N,)).reshape(-1, config.N)
    core = np.broadcast_to(core, lead + (config.L_s,))
    code = code or PermutationCode(config.R)
    anchor = (len(code) > 1) if anchor is None else anchor
    a = anchor_vector(config.N, config.M) if anchor else np.ones(config.N, dtype=np.complex128)
    # (n_perms, B, N): one equivalent CIR per permutation hypothesis
    g_k = np.stack([scatter_core(core.reshape(-1, config.L_s), core_positions(config, k), config.N) for k in code.table])
    return lead, yb, code, a, g_k


def im_ml_detect(y, core, config, code=None, anchor=None, chunk=1024):
    """Joint ML search over used permutations and all ``M**N`` data blocks.

    ``core`` is the stacked link taps ``(..., L_s)`` or a
    :class:`FadingRealization`. Returns ``k_hat`` as table indices.
    """
    lead, yb, code, a, g_k = _im_setup(y, core, config, code, anchor)
    N = config.N
    n_perm = len(code)
    if n_perm * config.M**N > SEARCH_GUARD:
        raise CapacityError(f"{n_perm} * {config.M}**{N} hypotheses exceed the 2**20 search guard")
    C = candidate_blocks(N, config.M)
    best = np.full(yb.shape[0], np.inf)
    arg_x = np.zeros(yb.shape[0], dtype=np.int64)
    arg_k = np.zeros(yb.shape[0], dtype=np.int64)
    Ca = C * a
    for i in range(n_perm):
        arg, met = _search(yb, cir(g_k[i]), Ca, chunk)
        better = met < best
        best = np.where(better, met, best)
        arg_x = np.where(better, arg, arg_x)
        arg_k = np.where(better, i, arg_k)
    return DetectionResult(
        x_hat=C[arg_x].reshape(lead + (N,)),
        metric=best.reshape(lead),
        detector_id="IM-ML",
        k_hat=arg_k.reshape(lead),
        n_candidates=n_perm * C.shape[0],
    )


def im_low_complexity_detect(y, core, N0, config, code=None, mode=None, anchor=None):
    """One equalize-and-slice pass per permutation hypothesis, then pick the best fit.

    For each used permutation the block is equalized against that
    permutation's CIR, the anchor rotation is undone, symbols are sliced
    independently, and the re-modulated block is scored by
    ``||y - cir(s_tilde) g_k||^2``.
    """
    mode = mode or config.lc_equalizer
    lead, yb, code, a, g_k = _im_setup(y, core, config, code, anchor)
    N, M = config.N, config.M
    soft = np.fft.ifft(equalizer_taps(g_k, N0, mode) * np.fft.fft(yb, axis=-1)[None], axis=-1)
    s_hat = psk_slice(soft * a.conj(), M)  # (n_perms, B, N)
    pred = np.fft.ifft(np.fft.fft(s_hat * a, axis=-1) * np.fft.fft(g_k, axis=-1), axis=-1)
    T = np.sum(np.abs(yb[None] - pred) ** 2, axis=-1)
    k_hat = np.argmin(T, axis=0)
    cols = np.arange(yb.shape[0])
    return DetectionResult(
        x_hat=s_hat[k_hat, cols].reshape(lead + (N,)),
        metric=T[k_hat, cols].reshape(lead),
        detector_id="IM-LC",
        k_hat=k_hat.reshape(lead),
        n_candidates=len(code),
        x_soft=(soft[k_hat, cols] * a.conj()).reshape(lead + (N,)),
    )


# --- estimator wrappers --------------------------------------------------------


class BlockDetector(BaseEstimator):
    """Detector with the CIR as fitted state.

    ``fit(g_eq)`` loads channel knowledge (true or estimated); ``predict(Y)``
    returns hard symbol decisions for received blocks ``Y`` of shape
    ``(n_blocks, N)`` and ``predict_bits`` the Gray-demapped bits.

    Parameters
    ----------
    method : {"ML", "ZF", "MMSE"}
    M : int
        PSK order.
    noise_power : float
        ``N0`` used by the MMSE weights.
    """

    def __init__(self, method="MMSE", M=2, noise_power=0.0):
        self.method = method
        self.M = M
        self.noise_power = noise_power

    def fit(self, g_eq, y=None):
        g = check_vector(g_eq, "g_eq")
        if self.method not in ("ML", "ZF", "MMSE"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method != "ML":
            self.weights_ = equalizer_taps(g, self.noise_power, self.method)
        self.g_eq_ = g
        self.n_features_in_ = g.size
        self.classes_ = constellation(self.M)
        return self

    def decision_function(self, Y):
        """Equalized (pre-slicer) symbols; only defined for the linear equalizers."""
        check_is_fitted(self, "g_eq_")
        if self.method == "ML":
            raise AttributeError("ML detection has no soft output")
        return np.fft.ifft(self.weights_ * np.fft.fft(check_vector(Y, "Y", allow_batch=True), axis=-1), axis=-1)

    def predict(self, Y):
        check_is_fitted(self, "g_eq_")
        if self.method == "ML":
            return ml_detect(Y, self.g_eq_, self.M).x_hat
        return psk_slice(self.decision_function(Y), self.M)

    def predict_bits(self, Y):
        return psk_demodulate(self.predict(Y), self.M)

    def score(self, Y, x_true):
        """Symbol accuracy."""
        return float(np.mean(psk_slice_indices(self.predict(Y), self.M) == psk_slice_indices(x_true, self.M)))


class IMDetector(BaseEstimator):
    """Joint (data, permutation) detector for the IM scheme.

    ``fit(core_taps)`` takes the stacked link taps; ``predict(Y)`` returns
    ``(x_hat, k_hat)`` with ``k_hat`` as permutation tuples.
    """

    def __init__(self, config, method="IM-LC", noise_power=0.0, code=None):
        self.config = config
        self.method = method
        self.noise_power = noise_power
        self.code = code

    def fit(self, core, y=None):
        if self.method not in ("IM-ML", "IM-LC"):
            raise ValueError(f"unknown method {self.method!r}")
        self.core_ = check_vector(core.core if isinstance(core, FadingRealization) else core, "core")
        self.code_ = self.code or PermutationCode(self.config.R)
        return self

    def _detect(self, Y):
        check_is_fitted(self, "core_")
        if self.method == "IM-ML":
            return im_ml_detect(Y, self.core_, self.config, self.code_)
        return im_low_complexity_detect(Y, self.core_, self.noise_power, self.config, self.code_)

    def predict(self, Y):
        res = self._detect(Y)
        return res.x_hat, np.array(self.code_.table)[res.k_hat]
