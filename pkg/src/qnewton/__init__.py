"""Comparator-based quantum linear system solver, its classical model, and Newton drivers."""

__version__ = "0.1.0"

from .circuit import QLSSConfig, run_qlss
from .encoding import QLSSResult, encode_problem, rescale_to_classical, spectral_prescale
from .fixedpoint import FixedPointFormat
from .model import model_qlss_solve
from .newton import StopCriteria, newton_solve

__all__ = [
    "FixedPointFormat",
    "QLSSConfig",
    "QLSSResult",
    "StopCriteria",
    "encode_problem",
    "model_qlss_solve",
    "newton_solve",
    "rescale_to_classical",
    "run_qlss",
    "spectral_prescale",
]
