"""Link-level simulation and error analysis of RIS-assisted cyclic-prefixed single-carrier transmission."""

from ._validation import CapacityError, ConfigurationError, SingularityError
from .config import SystemConfig
from .detection import BlockDetector, IMDetector
from .estimation import LSChannelEstimator

__all__ = [
    "BlockDetector",
    "CapacityError",
    "ConfigurationError",
    "IMDetector",
    "LSChannelEstimator",
    "SingularityError",
    "SystemConfig",
]
__version__ = "0.1.0"
