"""Single-block time-domain least-squares estimation of the equivalent CIR."""

from dataclasses import dataclass
from math import gcd

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import SingularityError, check_noise_power, check_unit_modulus, check_vector
from .numerics import cir, cyclic_shift, dft

SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class PilotBlock:
    x_p: np.ndarray
    varpi: int | None = None

    @property
    def N(self):
        return self.x_p.size

    @property
    def is_orthogonal(self):
        """True when ``X_p^H X_p = N I`` to 1e-10."""
        X = cir(self.x_p)
        return bool(np.max(np.abs(X.conj().T @ X - self.N * np.eye(self.N))) <= 1e-10)


def zadoff_chu_pilot(N, varpi=1):
    """Even-length Zadoff-Chu pilot ``exp(j*varpi*pi*n**2/N)``, ``n = 0..N-1``."""
    N, varpi = int(N), int(varpi)
    if N < 2 or N % 2:
        raise ValueError(f"Zadoff-Chu pilot needs an even length, got N={N}")
    if gcd(varpi, N) != 1:
        raise ValueError(f"varpi={varpi} is not coprime with N={N}")
    n = np.arange(N)
    # reduce the exponent modulo 2N first so large N keeps full phase precision
    return PilotBlock(np.exp(1j * np.pi * ((varpi * n * n) % (2 * N)) / N), varpi)


def random_psk_pilot(N, M, rng, max_tries=100):
    """Random M-PSK pilot redrawn until its circulant is comfortably invertible."""
    for _ in range(max_tries):
        x = np.exp(2j * np.pi * rng.integers(0, M, N) / M)
        if np.min(np.abs(dft(x))) > 1e-3:
            return PilotBlock(x)
    raise SingularityError("could not draw an invertible random pilot")


def pilot_autocorrelation(x_p):
    """Cyclic autocorrelation ``x_pp[n] = x_p(n)^H x_p``; first column of ``X_p^H X_p``."""
    x_p = check_vector(x_p, "x_p")
    return np.array([np.vdot(cyclic_shift(x_p, n), x_p) for n in range(x_p.size)])


def pilot_spectrum(x_p):
    """Eigenvalues ``d_p(k)`` of ``X_p^H X_p`` (DFT of the autocorrelation)."""
    return dft(pilot_autocorrelation(x_p)).real


def theoretical_mse(pilot, N0):
    """``N0 * sum_k 1/d_p(k)``, the MSE of the LS estimate over all ``N`` entries."""
    x_p = pilot.x_p if isinstance(pilot, PilotBlock) else check_vector(pilot, "pilot")
    d = pilot_spectrum(x_p)
    if np.min(np.abs(d)) < SINGULAR_TOL * x_p.size**2:
        raise SingularityError("pilot circulant is singular (zero spectral bin)")
    return check_noise_power(N0) * float(np.sum(1.0 / d))


def theoretical_mse_trace(pilot, N0):
    """Dense reference: ``N0 * Tr{(X_p^H X_p)^-1}``."""
    x_p = pilot.x_p if isinstance(pilot, PilotBlock) else check_vector(pilot, "pilot")
    X = cir(x_p)
    return check_noise_power(N0) * float(np.trace(np.linalg.inv(X.conj().T @ X)).real)


@dataclass(frozen=True)
class ChannelEstimate:
    g_hat: np.ndarray
    error_variance: float | None = None


def ls_estimate(y, pilot, N0=None, support=None):
    """Least-squares estimate ``X_p^{-1} y`` of the equivalent CIR.

    Orthogonal (Zadoff-Chu) pilots use ``X_p^H y / N``; other pilots are
    inverted in the frequency domain. ``support`` optionally zeroes every
    entry outside the known tap positions. Batches along leading axes.
    """
    if not isinstance(pilot, PilotBlock):
        pilot = PilotBlock(check_unit_modulus(check_vector(pilot, "pilot"), "pilot"))
    y = check_vector(y, "y", allow_batch=True)
    N = pilot.N
    if y.shape[-1] != N:
        raise ValueError(f"received block has {y.shape[-1]} samples, pilot has {N}")
    if pilot.is_orthogonal:
        # X_p^H y is the circular cross-correlation of y with x_p
        g_hat = np.fft.ifft(np.fft.fft(y, axis=-1) * np.conj(np.fft.fft(pilot.x_p)), axis=-1) / N
    else:
        spec = np.fft.fft(pilot.x_p)
        if np.min(np.abs(spec)) < SINGULAR_TOL * np.sqrt(N):
            raise SingularityError("pilot circulant is singular (zero spectral bin)")
        g_hat = np.fft.ifft(np.fft.fft(y, axis=-1) / spec, axis=-1)
    if support is not None:
        mask = np.zeros(N, dtype=bool)
        mask[np.asarray(support)] = True
        g_hat = np.where(mask, g_hat, 0.0)
    var = None if N0 is None else theoretical_mse(pilot, N0) / N
    return ChannelEstimate(g_hat=g_hat, error_variance=var)


class LSChannelEstimator(TransformerMixin, BaseEstimator):
    """Least-squares CIR estimation as a transformer: received pilot blocks in, CIRs out.

    Parameters
    ----------
    N : int
        Block length.
    varpi : int, default=1
        Zadoff-Chu root, coprime with ``N``. Ignored when ``pilot`` is given.
    pilot : array-like of shape (N,), optional
        Explicit unit-modulus pilot.
    noise_power : float, optional
        ``N0``; enables ``error_variance_``.
    support : array-like of int, optional
        Known tap positions; entries outside are zeroed.
    """

    def __init__(self, N=16, varpi=1, pilot=None, noise_power=None, support=None):
        self.N = N
        self.varpi = varpi
        self.pilot = pilot
        self.noise_power = noise_power
        self.support = support

    def fit(self, Y=None, y=None):
        if self.pilot is not None:
            self.pilot_ = PilotBlock(check_unit_modulus(check_vector(self.pilot, "pilot"), "pilot"))
        else:
            self.pilot_ = zadoff_chu_pilot(self.N, self.varpi)
        self.error_variance_ = None if self.noise_power is None else theoretical_mse(self.pilot_, self.noise_power) / self.pilot_.N
        return self

    def transform(self, Y):
        """Estimate one CIR per received pilot block (rows of ``Y``)."""
        check_is_fitted(self, "pilot_")
        return ls_estimate(Y, self.pilot_, support=self.support).g_hat
