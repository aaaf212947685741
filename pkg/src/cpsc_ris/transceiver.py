"""Bit-to-waveform chain: PSK, cyclic prefix, RIS phase profiles, IM coding."""

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from math import factorial, floor, log2

import numpy as np

from ._validation import check_noise_power, check_psk_order, check_unit_modulus, check_vector
from .numerics import cir_apply, cyclic_shift


# --- PSK --------------------------------------------------------------------


def gray_code(d):
    d = np.asarray(d)
    return d ^ (d >> 1)


def gray_decode(g):
    g = np.asarray(g).copy()
    shift = g >> 1
    while np.any(shift):
        g ^= shift
        shift >>= 1
    return g


def constellation(M):
    """Unit-energy M-PSK points ordered by phase index ``d``: ``exp(2j*pi*d/M)``."""
    M = check_psk_order(M)
    return np.exp(2j * np.pi * np.arange(M) / M)


def bits_to_indices(bits, M):
    """Group bits MSB-first into Gray-coded phase indices."""
    k = int(log2(check_psk_order(M)))
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % k:
        raise ValueError(f"bit length {bits.shape[-1]} is not a multiple of log2(M)={k}")
    words = bits.reshape(bits.shape[:-1] + (-1, k)) @ (1 << np.arange(k - 1, -1, -1))
    return gray_decode(words)


def indices_to_bits(d, M):
    k = int(log2(check_psk_order(M)))
    words = gray_code(np.asarray(d, dtype=np.int64))
    bits = (words[..., None] >> np.arange(k - 1, -1, -1)) & 1
    return bits.reshape(words.shape[:-1] + (-1,)).astype(np.int8)


def psk_modulate(bits, M):
    """Gray-mapped M-PSK; works on ``(..., n_bits)`` and returns ``(..., n_sym)``."""
    return constellation(M)[bits_to_indices(bits, M)]


def psk_slice_indices(z, M):
    """Minimum-distance decisions, returned as phase indices."""
    M = check_psk_order(M)
    return np.mod(np.rint(np.angle(z) * M / (2 * np.pi)), M).astype(np.int64)


def psk_slice(z, M):
    return constellation(M)[psk_slice_indices(z, M)]


def psk_demodulate(symbols, M):
    return indices_to_bits(psk_slice_indices(symbols, M), M)


@dataclass(frozen=True)
class SymbolBlock:
    symbols: np.ndarray
    source_bits: np.ndarray
    im_permutation: tuple | None = None
    anchor_applied: bool = False


# --- cyclic prefix -----------------------------------------------------------


def add_cp(x, L):
    """Prefix the last ``L`` samples: ``[x[N-L:], x]``."""
    x = check_vector(x, "x", allow_batch=True)
    L = int(L)
    if not 0 <= L < x.shape[-1]:
        raise ValueError(f"CP length must satisfy 0 <= L < N, got L={L}, N={x.shape[-1]}")
    return np.concatenate([x[..., x.shape[-1] - L :], x], axis=-1)


def remove_cp(v, L):
    v = np.asarray(v)
    L = int(L)
    if not 0 <= L < v.shape[-1]:
        raise ValueError(f"CP length L={L} incompatible with block of {v.shape[-1]} samples")
    return v[..., L:]


# --- RIS cyclic delay diversity ---------------------------------------------


def ris_phase_profile(x_cp, delays, L):
    """Per-group phase vectors that turn ``x_cp`` into its cyclically delayed copies.

    Returns ``theta`` of shape ``(R, N + L)`` in ``[0, 2*pi)`` such that
    ``x_cp * exp(1j * theta[r]) == add_cp(cyclic_shift(x, delays[r]), L)``.
    For M-PSK input the entries are multiples of ``2*pi/M``.
    """
    x_cp = check_unit_modulus(check_vector(x_cp, "x_cp"), "x_cp")
    x = remove_cp(x_cp, L)
    targets = np.stack([add_cp(cyclic_shift(x, d), L) for d in delays]) if len(delays) else np.empty((0, x_cp.size))
    theta = np.mod(np.angle(targets * x_cp.conj()), 2 * np.pi)
    theta[theta > 2 * np.pi - 1e-12] = 0.0
    return theta


def phase_set(M):
    """The discrete phase alphabet ``{0, 2pi/M, ..., 2pi(M-1)/M}``."""
    return 2 * np.pi * np.arange(check_psk_order(M)) / M


def reflect(x_cp, theta):
    """Signals leaving each reflecting group, ``(R, N + L)``."""
    return np.asarray(x_cp)[None, :] * np.exp(1j * np.asarray(theta))


def received_from_links(x, links, delays, L):
    """Noiseless received block built sample-by-sample from the physical links.

    The transmitter sends ``add_cp(x)``; group ``r`` reflects it through the
    phase profile for ``delays[r-1]``; every path is linearly convolved with
    its tap vector and the receiver drops the CP. Independent of any
    circulant algebra, so it serves as a cross-check of the matrix models.
    """
    x = check_vector(x, "x")
    x_cp = add_cp(x, L)
    N = x.size
    incident = [x_cp]
    if len(delays):
        incident.extend(reflect(x_cp, ris_phase_profile(x_cp, delays, L)))
    y = np.zeros(N, dtype=np.complex128)
    for s, g in zip(incident, links):
        y += np.convolve(s, g)[L : L + N]
    return y


def received_per_link(x, links, delays, N):
    """``sum_r cir(g_r^0) @ x(delay_r)`` with ``delay_0 = 0``."""
    x = check_vector(x, "x")
    y = np.zeros(N, dtype=np.complex128)
    for g, d in zip(links, (0,) + tuple(delays)):
        g0 = np.zeros(N, dtype=np.complex128)
        g0[: len(g)] = g
        y += cir_apply(g0, cyclic_shift(x, d))
    return y


# --- index modulation ---------------------------------------------------------


class PermutationCode:
    """Bijection between ``b1 = floor(log2(R!))`` bits and delay permutations.

    By default the table lists permutations of ``1..R`` in lexicographic order
    and keeps the first ``2**b1``. An explicit ``table`` overrides this.
    """

    def __init__(self, R, table=None):
        self.R = int(R)
        if self.R < 1:
            raise ValueError("R must be >= 1")
        self.b1 = floor(log2(factorial(self.R)))
        if table is None:
            table = list(permutations(range(1, self.R + 1)))[: 2**self.b1]
        table = [tuple(int(v) for v in k) for k in table]
        ident = list(range(1, self.R + 1))
        if len(table) != 2**self.b1:
            raise ValueError(f"table needs {2**self.b1} permutations, got {len(table)}")
        if len(set(table)) != len(table) or any(sorted(k) != ident for k in table):
            raise ValueError("table entries must be distinct permutations of 1..R")
        self.table = tuple(table)
        self._index = {k: i for i, k in enumerate(self.table)}

    def __len__(self):
        return len(self.table)

    def __repr__(self):
        return f"PermutationCode(R={self.R}, b1={self.b1})"

    def encode_index(self, i):
        return self.table[int(i)]

    def decode_index(self, k):
        try:
            return self._index[tuple(int(v) for v in k)]
        except KeyError:
            raise KeyError(f"permutation {tuple(k)} is not in the code table") from None


def im_encode(bits_b1, code):
    bits = np.asarray(bits_b1, dtype=np.int64).ravel()
    if bits.size != code.b1:
        raise ValueError(f"expected {code.b1} index bits, got {bits.size}")
    idx = int(bits @ (1 << np.arange(code.b1 - 1, -1, -1))) if code.b1 else 0
    return code.encode_index(idx)


def im_decode(k, code):
    idx = code.decode_index(k)
    return ((idx >> np.arange(code.b1 - 1, -1, -1)) & 1).astype(np.int8)


def anchor_vector(N, M):
    a = np.ones(N, dtype=np.complex128)
    a[0] = np.exp(1j * np.pi / check_psk_order(M))
    return a


def apply_anchor(x, M):
    """Rotate the first symbol by ``pi/M``."""
    x = np.array(x, dtype=np.complex128)
    x[..., 0] *= np.exp(1j * np.pi / check_psk_order(M))
    return x


def strip_anchor(x_tilde, M):
    x = np.array(x_tilde, dtype=np.complex128)
    x[..., 0] *= np.exp(-1j * np.pi / check_psk_order(M))
    return x


# --- channel output -----------------------------------------------------------


def synthesize_received(x, g_eq, N0, rng=None):
    """``y = cir(x) @ g_eq + w`` with ``w ~ CN(0, N0 I)``; batches along leading axes."""
    x = check_vector(x, "x", allow_batch=True)
    g_eq = check_vector(g_eq, "g_eq", allow_batch=True)
    if x.shape[-1] != g_eq.shape[-1]:
        raise ValueError(f"block length {x.shape[-1]} does not match CIR length {g_eq.shape[-1]}")
    N0 = check_noise_power(N0)
    y = cir_apply(x, g_eq)
    if N0 > 0:
        if rng is None:
            raise ValueError("an rng is required when N0 > 0")
        y = y + complex_noise(rng, y.shape, N0)
    return y


def complex_noise(rng, shape, N0):
    z = rng.standard_normal(size=(2, *np.atleast_1d(shape)))
    return np.sqrt(N0 / 2.0) * (z[0] + 1j * z[1])


def spectral_efficiency(config, im=None):
    """Bits per channel use as an exact fraction."""
    im = config.im if im is None else im
    b1 = floor(log2(factorial(config.R))) if im and config.R >= 1 else 0
    return Fraction(config.N * config.bits_per_symbol + b1, config.N + config.L)
