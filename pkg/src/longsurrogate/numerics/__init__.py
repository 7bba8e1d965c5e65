"""Regression solvers, hypothesis tests, special functions, and RNG."""

from .regression import (LinearFit, elastic_net_fit, ols_fit, ridge_fit,
                         tune_elastic_net)
from .rng import RandomStream, as_stream
from .special import (betainc, chi2_sf, gammainc_lower, gammainc_upper,
                      normal_sf_two_sided, t_sf_two_sided)
from .stats import TestResult, chi_square_gof, coefficient_t_test, welch_t_test

__all__ = [
    "LinearFit", "ols_fit", "ridge_fit", "elastic_net_fit", "tune_elastic_net",
    "RandomStream", "as_stream",
    "betainc", "chi2_sf", "gammainc_lower", "gammainc_upper",
    "normal_sf_two_sided", "t_sf_two_sided",
    "TestResult", "welch_t_test", "coefficient_t_test", "chi_square_gof",
]
