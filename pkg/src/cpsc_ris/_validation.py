"""Input validation helpers shared by the public functions and estimators.

scikit-learn's ``check_array`` rejects complex input, so the baseband
arrays used throughout the package are validated here instead.
"""

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a scenario violates a structural constraint."""


class CapacityError(RuntimeError):
    """Raised when an exhaustive search space exceeds its guard."""


class SingularityError(np.linalg.LinAlgError):
    """Raised when a channel or pilot matrix is (numerically) singular."""


def check_vector(v, name="v", allow_batch=False):
    """Return ``v`` as a finite complex128 array.

    With ``allow_batch`` the last axis is the block axis and any number of
    leading batch axes are accepted.
    """
    arr = np.asarray(v, dtype=np.complex128)
    if arr.ndim == 0 or (arr.ndim > 1 and not allow_batch):
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if arr.shape[-1] == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_psk_order(M):
    M = int(M)
    if M < 2 or M & (M - 1):
        raise ValueError(f"PSK order must be a power of two >= 2, got {M}")
    return M


def check_unit_modulus(v, name="v", atol=1e-9):
    if not np.allclose(np.abs(v), 1.0, rtol=0.0, atol=atol):
        raise ValueError(f"{name} must have unit-modulus entries")
    return v


def check_noise_power(N0):
    N0 = float(N0)
    if not np.isfinite(N0) or N0 < 0:
        raise ValueError(f"noise power must be finite and non-negative, got {N0}")
    return N0
