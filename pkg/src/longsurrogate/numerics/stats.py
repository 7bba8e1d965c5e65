"""Two-sided hypothesis tests: Welch t, regression coefficient t, and
chi-square goodness of fit."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError
from .special import chi2_sf, t_sf_two_sided

__all__ = ["TestResult", "welch_t_test", "coefficient_t_test", "chi_square_gof",
           "DEFAULT_LEVELS"]

DEFAULT_LEVELS = (0.01, 0.05, 0.1)


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-sided test.

    ``reject_at[level]`` is true exactly when ``p_value < level``.
    ``degenerate`` marks tests whose statistic is undefined because both
    samples have zero variance.
    """

    __test__ = False  # keep pytest from collecting this class

    statistic: float
    degrees_of_freedom: float
    p_value: float
    reject_at: dict = field(default_factory=dict)
    degenerate: bool = False

    @classmethod
    def build(cls, statistic, df, p_value, levels=DEFAULT_LEVELS, degenerate=False):
        p = float(min(1.0, max(0.0, p_value)))
        return cls(
            statistic=float(statistic),
            degrees_of_freedom=float(df),
            p_value=p,
            reject_at={float(lv): bool(p < lv) for lv in levels},
            degenerate=degenerate,
        )

    def rejects(self, level):
        return self.p_value < level

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "df": self.degrees_of_freedom,
            "p_value": self.p_value,
            "degenerate": self.degenerate,
        }


def _sample_moments(x):
    n = x.shape[0]
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    return n, mean, var


def welch_t_test(a, b, levels=DEFAULT_LEVELS):
    """Welch two-sample t-test with Welch-Satterthwaite degrees of freedom.

    A sample of size one contributes zero variance. If both samples have
    zero variance the result is flagged ``degenerate``: the statistic is
    0 with p = 1 when the means agree and infinite with p = 0 otherwise.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ArgumentError("welch_t_test needs two non-empty samples",
                            module="numerics")
    na, ma, va = _sample_moments(a)
    nb, mb, vb = _sample_moments(b)
    diff = ma - mb
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 <= 0:
        if diff == 0:
            return TestResult.build(0.0, np.nan, 1.0, levels, degenerate=True)
        return TestResult.build(np.copysign(np.inf, diff), np.nan, 0.0, levels,
                                degenerate=True)
    stat = diff / np.sqrt(se2)
    denom = 0.0
    if na > 1:
        denom += sa * sa / (na - 1)
    if nb > 1:
        denom += sb * sb / (nb - 1)
    df = se2 * se2 / denom
    return TestResult.build(stat, df, t_sf_two_sided(stat, df), levels)


def coefficient_t_test(fit, index, null_value=0.0, levels=DEFAULT_LEVELS):
    """t-test of one OLS coefficient against ``null_value``.

    Uses N - P - 1 residual degrees of freedom.
    """
    se = fit.coefficient_standard_errors
    if se is None:
        raise ArgumentError("coefficient test needs an unregularized fit",
                            module="numerics")
    index = int(index)
    if not 0 <= index < fit.coefficients.shape[0]:
        raise ArgumentError(f"coefficient index {index} out of range",
                            module="numerics")
    df = fit.n_observations - fit.coefficients.shape[0] - 1
    if df <= 0:
        raise ArgumentError("no residual degrees of freedom", module="numerics")
    est = float(fit.coefficients[index]) - null_value
    s = float(se[index])
    if s == 0:
        if est == 0:
            return TestResult.build(0.0, df, 1.0, levels, degenerate=True)
        return TestResult.build(np.copysign(np.inf, est), df, 0.0, levels,
                                degenerate=True)
    stat = est / s
    return TestResult.build(stat, df, t_sf_two_sided(stat, df), levels)


def chi_square_gof(observed, expected, levels=DEFAULT_LEVELS):
    """Pearson chi-square goodness-of-fit test with k - 1 degrees of freedom."""
    obs = np.asarray(observed, dtype=float).ravel()
    exp = np.asarray(expected, dtype=float).ravel()
    if obs.shape != exp.shape or obs.size < 2:
        raise ArgumentError("observed and expected need the same length >= 2",
                            module="numerics")
    if np.any(exp <= 0) or np.any(obs < 0):
        raise ArgumentError("expected counts must be positive", module="numerics")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = obs.size - 1
    return TestResult.build(stat, df, chi2_sf(stat, df), levels)
