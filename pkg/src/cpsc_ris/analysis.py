"""Closed-form error analysis for maximum-likelihood detection.

The squared distance between two candidate blocks seen through the channel
is a quadratic form in the ``L_s`` core taps, ``g'^H A g'`` with
``A = D^H D`` and ``D`` the core columns of ``cir(x) - cir(x_hat)``.
Diagonalising ``A`` and averaging the exponential Q-function approximation
``Q(x) ~ exp(-x^2/2)/12 + exp(-2x^2/3)/4`` over the Gaussian-approximated
Nakagami taps gives the unconditional PEP as a product of MGFs; the union
bound sums bit-weighted PEPs over every ordered pair of blocks.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.special import erfc

from ._validation import CapacityError, check_vector
from .channel import core_positions, core_tap_params
from .numerics import cir, hermitian_eig
from .transceiver import PermutationCode, anchor_vector, constellation, indices_to_bits

BOUND_GUARD_BITS = 12
RANK_RTOL = 1e-9


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def chiani_q(x):
    x2 = np.asarray(x, dtype=float) ** 2
    return np.exp(-x2 / 2.0) / 12.0 + np.exp(-2.0 * x2 / 3.0) / 4.0


@dataclass(frozen=True)
class TapStatistics:
    """Gaussian-approximation parameters of the stacked core taps (phase 0)."""

    m: np.ndarray
    omega: np.ndarray
    mu: np.ndarray
    omega_s: np.ndarray

    @classmethod
    def from_params(cls, params, phi=0.0):
        return cls(
            m=np.array([p.m for p in params]),
            omega=np.array([p.omega for p in params]),
            mu=np.array([p.mean(phi) for p in params]),
            omega_s=np.array([p.omega_s for p in params]),
        )

    @classmethod
    def from_config(cls, config, phi=0.0):
        return cls.from_params(core_tap_params(config), phi)

    def __len__(self):
        return self.omega.size


def conditional_pep(x, x_hat, g_eq, N0, sigma_e2=0.0):
    """PEP of deciding ``x_hat`` when ``x`` was sent, given the (estimated) CIR.

    ``sigma_e2`` is the per-entry variance of the channel-estimation error;
    zero gives the perfect-CSI expression ``Q(sqrt(|(X - X_hat) g|^2 / 2N0))``.
    """
    x = check_vector(x, "x")
    X = cir(x)
    v = (X - cir(check_vector(x_hat, "x_hat"))) @ check_vector(g_eq, "g_eq")
    dist = np.vdot(v, v).real
    var = 2.0 * N0 * dist + 2.0 * sigma_e2 * np.linalg.norm(X.conj().T @ v) ** 2
    if var <= 0.0:
        return 0.5 if dist == 0.0 else 0.0
    return float(q_function(dist / np.sqrt(var)))


def pairwise_statistic(x, x_hat, g_hat, N0, sigma_e2, rng, size):
    """Draw the decision statistic ``V``; ``P(V > 0)`` is the conditional PEP."""
    X = cir(check_vector(x, "x"))
    v = (X - cir(check_vector(x_hat, "x_hat"))) @ check_vector(g_hat, "g_hat")
    N = v.size
    z = rng.standard_normal(size=(4, size, N))
    w = np.sqrt(N0 / 2.0) * (z[0] + 1j * z[1])
    g_e = np.sqrt(sigma_e2 / 2.0) * (z[2] + 1j * z[3])
    w_bar = w - g_e @ X.T
    return -np.vdot(v, v).real - 2.0 * (w_bar.conj() @ v).real


def difference_columns(x, x_hat, positions):
    """Core columns of ``cir(x) - cir(x_hat)``; batches along leading axes."""
    e = np.asarray(x, dtype=np.complex128) - np.asarray(x_hat, dtype=np.complex128)
    return cir(e)[..., positions]


def gram(D):
    return np.swapaxes(D.conj(), -1, -2) @ D


def tap_mgf(t, l, U, stats):
    """MGF of ``|u_l^T g'|^2`` at ``t`` where ``u_l`` is row ``l`` of ``U``."""
    u = np.asarray(U)[l]
    w = np.abs(u) ** 2 @ stats.omega_s
    denom = 1.0 - t * w
    if denom <= 0:
        raise ValueError(f"t={t} lies beyond the MGF pole at {1.0 / w}")
    return float(np.exp(t * np.abs(u @ stats.mu) ** 2 / denom) / denom)


def _pep_from_eigensystem(d, U, stats, N0):
    """Vectorised PEP over pairs ``(P, L_s)`` and noise levels ``(S,)`` -> ``(P, S)``."""
    w = np.abs(U) ** 2 @ stats.omega_s  # (P, L_s)
    v = np.abs(U @ stats.mu) ** 2
    d = np.clip(d, 0.0, None)
    N0 = np.atleast_1d(np.asarray(N0, dtype=float))
    if np.any(N0 <= 0):
        raise ValueError("noise power must be positive for the PEP formula")
    out = np.zeros((d.shape[0], N0.size))
    for c, weight in ((4.0, 1.0 / 12.0), (3.0, 1.0 / 4.0)):
        t = -d[:, None, :] / (c * N0[None, :, None])  # (P, S, L_s)
        denom = 1.0 - t * w[:, None, :]
        log_m = t * v[:, None, :] / denom - np.log(denom)
        out += weight * np.exp(log_m.sum(axis=-1))
    return out


def unconditional_pep(x, x_hat, stats, N0, positions):
    """Channel-averaged PEP for the pair ``(x, x_hat)``.

    ``positions`` are the indices of the core taps inside ``g_eq``. Returns a
    float for scalar ``N0`` and an array for a vector of noise levels.
    """
    A = gram(difference_columns(x, x_hat, positions))
    eig = hermitian_eig(A)
    pep = _pep_from_eigensystem(eig.eigenvalues[None], eig.U[None], stats, N0)[0]
    return float(pep[0]) if np.ndim(N0) == 0 else pep


# --- candidate enumeration -----------------------------------------------------


@dataclass(frozen=True)
class CandidateSet:
    """Every transmittable block with its bits and core-column placement."""

    symbols: np.ndarray  # (K, N) transmitted (anchor-rotated when anchored)
    bits: np.ndarray  # (K, b)
    perm_index: np.ndarray  # (K,)
    positions: np.ndarray  # (n_perms, L_s)


def enumerate_candidates(config, code=None, anchor=None):
    """Enumerate the ``2**b`` candidate blocks in bit-word order.

    For the IM scheme the leading ``b1`` bits select the permutation. The
    anchor rotation defaults to on whenever more than one permutation is in
    use.
    """
    M, N = config.M, config.N
    if config.im:
        code = code or PermutationCode(config.R)
        perms = code.table
    else:
        perms = (None,)
    anchor = (len(perms) > 1) if anchor is None else anchor
    b = int(np.log2(len(perms))) + config.b2
    if b > BOUND_GUARD_BITS:
        raise CapacityError(
            f"{2**b} candidate blocks exceed the 2**{BOUND_GUARD_BITS} enumeration guard; reduce N or M"
        )
    sym_idx = np.array(list(product(range(M), repeat=N)), dtype=np.int64).reshape(-1, N)
    # order the data part by its Gray bit word
    data_bits = indices_to_bits(sym_idx, M)
    order = np.lexsort(data_bits.T[::-1])
    sym_idx, data_bits = sym_idx[order], data_bits[order]
    x = constellation(M)[sym_idx]
    if anchor:
        x = x * anchor_vector(N, M)
    n_p = len(perms)
    b1 = b - config.b2
    pidx = np.repeat(np.arange(n_p), x.shape[0])
    idx_bits = ((pidx[:, None] >> np.arange(b1 - 1, -1, -1)) & 1).astype(np.int8)
    bits = np.concatenate([idx_bits, np.tile(data_bits, (n_p, 1))], axis=1)
    positions = np.stack([core_positions(config, k) for k in perms])
    return CandidateSet(symbols=np.tile(x, (n_p, 1)), bits=bits, perm_index=pidx, positions=positions)


def _pair_chunks(K, chunk):
    i, j = np.triu_indices(K, k=1)
    for s in range(0, i.size, chunk):
        yield i[s : s + chunk], j[s : s + chunk]


def _pair_difference_columns(cands, i, j):
    Xi = cir(cands.symbols[i])
    Xj = cir(cands.symbols[j])
    pi = cands.positions[cands.perm_index[i]]
    pj = cands.positions[cands.perm_index[j]]
    rows = np.arange(Xi.shape[-1])[None, :, None]
    n = np.arange(i.size)[:, None, None]
    return Xi[n, rows, pi[:, None, :]] - Xj[n, rows, pj[:, None, :]]


def ber_union_bound(config, N0, code=None, anchor=None, chunk=8192):
    """Union bound on the ML bit error rate at noise level(s) ``N0``.

    Sums ``PEP * bit_errors`` over every ordered pair of distinct candidate
    blocks (permutation included for the IM scheme) and normalises by
    ``b * 2**b``. Values above one are possible at low SNR.
    """
    cands = enumerate_candidates(config, code=code, anchor=anchor)
    stats = TapStatistics.from_config(config)
    N0 = np.atleast_1d(np.asarray(N0, dtype=float))
    K, b = cands.bits.shape
    total = np.zeros(N0.size)
    for i, j in _pair_chunks(K, chunk):
        A = gram(_pair_difference_columns(cands, i, j))
        eig = hermitian_eig(A)
        pep = _pep_from_eigensystem(eig.eigenvalues, eig.U, stats, N0)
        xi = np.count_nonzero(cands.bits[i] != cands.bits[j], axis=1)
        total += 2.0 * (xi @ pep)  # PEP and bit count are symmetric in the pair
    return total / (b * 2.0**b)


@dataclass
class ErrorEventSpectrum:
    """Rank of ``A`` for every unordered pair of distinct blocks."""

    i: np.ndarray
    j: np.ndarray
    rank: np.ndarray
    xi: np.ndarray
    histogram: dict = field(default_factory=dict)

    @property
    def rank_min(self):
        return int(self.rank.min())


def matrix_rank(D, rtol=RANK_RTOL):
    s = np.linalg.svd(D, compute_uv=False)
    return np.count_nonzero(s > rtol * s.max(axis=-1, keepdims=True), axis=-1)


def diversity_rank_scan(config, code=None, anchor=None, chunk=8192):
    """Rank of the difference Gram matrix over all error events.

    The histogram counts ordered pairs ``(X, X_hat)``, ``X != X_hat``.
    """
    cands = enumerate_candidates(config, code=code, anchor=anchor)
    parts = []
    for i, j in _pair_chunks(cands.bits.shape[0], chunk):
        rank = matrix_rank(_pair_difference_columns(cands, i, j))
        xi = np.count_nonzero(cands.bits[i] != cands.bits[j], axis=1)
        parts.append((i, j, rank, xi))
    i, j, rank, xi = (np.concatenate(p) for p in zip(*parts))
    values, counts = np.unique(rank, return_counts=True)
    hist = {int(v): 2 * int(c) for v, c in zip(values, counts)}
    return ErrorEventSpectrum(i=i, j=j, rank=rank, xi=xi, histogram=hist)
