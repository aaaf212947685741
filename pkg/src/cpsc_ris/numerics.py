"""Complex linear-algebra kernels: circulants, DFT, Hermitian eigensystems.

Circulant convention: ``cir(x)[i, j] = x[(i - j) % N]``, i.e. the generator
is the first column. With this convention ``cir(x) @ g`` is the circular
convolution of ``x`` and ``g`` and therefore equals ``cir(g) @ x``, which is
what makes the per-link and equivalent-channel forms of the received signal
coincide.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_vector


def cir(generator):
    """Right-circulant matrix whose first column is ``generator``.

    Accepts a batch ``(..., N)`` and returns ``(..., N, N)``.
    """
    g = check_vector(generator, "generator", allow_batch=True)
    n = g.shape[-1]
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return g[..., idx]


def cir_apply(generator, v):
    """Compute ``cir(generator) @ v`` without forming the matrix (FFT route)."""
    g = np.asarray(generator, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    return np.fft.ifft(np.fft.fft(g, axis=-1) * np.fft.fft(v, axis=-1), axis=-1)


def dft(v, unitary=False):
    """N-point DFT along the last axis.

    The non-unitary form is ``sum_n v[n] exp(-2j*pi*n*k/N)``; the unitary
    form scales it by ``1/sqrt(N)`` so that norms are preserved.
    """
    return np.fft.fft(np.asarray(v, dtype=np.complex128), axis=-1, norm="ortho" if unitary else None)


def idft(v, unitary=False):
    return np.fft.ifft(np.asarray(v, dtype=np.complex128), axis=-1, norm="ortho" if unitary else None)


def dft_matrix(n):
    """Unitary DFT matrix ``F`` with ``F.conj().T @ F = I``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


@dataclass(frozen=True)
class HermitianEigenSystem:
    """``A = U^H diag(d) U``; row ``l`` of ``U`` is the mixing vector of eigen-tap ``l``."""

    eigenvalues: np.ndarray
    U: np.ndarray


def hermitian_eig(A, atol=1e-8):
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    Works on a stack ``(..., L, L)``. Returns ``U`` such that
    ``A = U^H diag(d) U`` (rows of ``U`` are conjugated eigenvectors).
    """
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - np.swapaxes(A.conj(), -1, -2)), initial=0.0) > atol * scale:
        raise ValueError("matrix is not Hermitian")
    w, V = np.linalg.eigh(A)
    # eigh sorts ascending; flip while keeping ties in a stable order
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    return HermitianEigenSystem(eigenvalues=w, U=np.swapaxes(V.conj(), -1, -2))


def cyclic_shift(v, delay):
    """Cyclically delay ``v``: ``out[n] = v[(n - delay) % N]``."""
    v = check_vector(v, "v", allow_batch=True)
    n = v.shape[-1]
    delay = int(delay)
    if not 0 <= delay < n:
        raise ValueError(f"delay must lie in [0, {n}), got {delay}")
    return np.roll(v, delay, axis=-1)
