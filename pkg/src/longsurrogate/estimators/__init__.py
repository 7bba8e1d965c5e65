"""Treatment-effect estimators for long-term experiments."""

from .additive import AdditiveEstimate, default_breakpoints, estimate_linear_additive
from .baselines import estimate_ceb, estimate_var
from .binning import QuantileBinning
from .common import LaggedDesign, fit_with_fallback, lagged_design
from .discrete import (DiscreteKernel, build_discrete_kernel,
                       estimate_longitudinal_discrete, horizon_schedule)
from .knn import NeighbourRegressor, estimate_knn
from .linear_surrogate import (SurrogateModelSet, estimate_lsm, fit_linear_surrogate,
                               forecast_linear_surrogate)
from .metrics import Metrics, compute_metrics
from .registry import ESTIMATORS, Estimator, make_estimator

__all__ = [
    "AdditiveEstimate", "default_breakpoints", "estimate_linear_additive",
    "estimate_ceb", "estimate_var", "QuantileBinning", "LaggedDesign",
    "fit_with_fallback", "lagged_design", "DiscreteKernel", "build_discrete_kernel",
    "estimate_longitudinal_discrete", "horizon_schedule", "NeighbourRegressor",
    "estimate_knn", "SurrogateModelSet", "estimate_lsm", "fit_linear_surrogate",
    "forecast_linear_surrogate", "Metrics", "compute_metrics", "ESTIMATORS",
    "Estimator", "make_estimator",
]
