"""Large-n expansion of exponential functionals of empirical means of discrete measures."""

from .expansion import ExpansionReport, PowerSeries, c2_coefficient, quadratic_series
from .estimator import LaplaceExpansion
from .functional import PolynomialFunctional
from .measure import DiscreteMeasure, normalize
from .oracle import EpsilonConfig, exact_log_Zn, extrapolate, mc_log_Zn, quadratic_restricted, sweep
from .pipeline import Analysis, analyze
from .spectral import CriticalityError, eigensystem
from .variational import UniquenessViolation, VariationalError, entropy, find_maximizer

__version__ = "0.1.0"

__all__ = [
    "Analysis",
    "CriticalityError",
    "DiscreteMeasure",
    "EpsilonConfig",
    "ExpansionReport",
    "LaplaceExpansion",
    "PolynomialFunctional",
    "PowerSeries",
    "UniquenessViolation",
    "VariationalError",
    "analyze",
    "c2_coefficient",
    "eigensystem",
    "entropy",
    "exact_log_Zn",
    "extrapolate",
    "find_maximizer",
    "mc_log_Zn",
    "normalize",
    "quadratic_restricted",
    "quadratic_series",
    "sweep",
]
