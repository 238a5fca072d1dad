"""Split conformal prediction with kernel sum-of-squares scale functions.

A mean ``m`` and a non-negative scale ``f(x) = phi(x)^T A phi(x)`` are learned
jointly from a convex program solved in its dual; split calibration of the
score ``(y - m(x))^2 / f(x)`` then yields intervals ``m(x) +/- sqrt(q f(x))``.
"""

from .conformal import CalibratedModel, adjusted_quantile, calibrate, predict_interval
from .datasets import Dataset, generate_case
from .dual import (KsosModel, KsosProblem, ProblemTemplate, SolverConfig, build_problem,
                   dual_gradient, dual_objective, solve_dual)
from .exceptions import (ConfigError, FitFailed, KsosError, NotConverged,
                         NotPositiveDefinite, SingularSystem, TuneFailed)
from .gp import GpModel, gp_fit
from .hsic import hsic_v_statistic, tune_lengthscale
from .kernels import KernelSpec, gram_matrix
from .metrics import evaluate_metrics, local_coverage, mutual_information_knn, r2_sqi

__version__ = "0.1.0"

__all__ = [
    "CalibratedModel",
    "adjusted_quantile",
    "calibrate",
    "predict_interval",
    "Dataset",
    "generate_case",
    "KsosModel",
    "KsosProblem",
    "ProblemTemplate",
    "SolverConfig",
    "build_problem",
    "dual_gradient",
    "dual_objective",
    "solve_dual",
    "ConfigError",
    "FitFailed",
    "KsosError",
    "NotConverged",
    "NotPositiveDefinite",
    "SingularSystem",
    "TuneFailed",
    "GpModel",
    "gp_fit",
    "hsic_v_statistic",
    "tune_lengthscale",
    "KernelSpec",
    "gram_matrix",
    "evaluate_metrics",
    "local_coverage",
    "mutual_information_knn",
    "r2_sqi",
]
