"""Non-local reaction-diffusion field theory: kernels, propagators, loop
integrals, renormalisation-group flows and particle simulation."""

from .errors import (BlowUpError, CapacityError, CriticalPointError, DivergenceError, NLRDError,
                     NumericalError, PoleError, ToleranceError, UVDivergenceError, ValidationError)
from .kernels import Kernel, Profile
from .meanfield import ModelParams
from .trace import DensityTrace

__version__ = "0.1.0"

__all__ = [
    "BlowUpError", "CapacityError", "CriticalPointError", "DensityTrace", "DivergenceError", "Kernel",
    "ModelParams", "NLRDError", "NumericalError", "PoleError", "Profile", "ToleranceError",
    "UVDivergenceError", "ValidationError", "__version__",
]
