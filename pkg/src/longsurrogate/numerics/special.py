"""Regularized incomplete gamma and beta functions and the tail
probabilities built on them.

Series and modified-Lentz continued fractions, evaluated in log space for
the prefactors so large shape parameters (df ~ 1e6) stay finite.
"""

import math

from ..errors import ArgumentError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 200_000


def _check_finite(*values):
    for v in values:
        if math.isnan(v):
            raise ArgumentError("special function argument is NaN", module="numerics")


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma function P(a, x).

    Parameters
    ----------
    a : float
        Shape, strictly positive.
    x : float
        Upper integration limit, non-negative.

    Returns
    -------
    float
        P(a, x) in [0, 1].
    """
    _check_finite(a, x)
    if a <= 0:
        raise ArgumentError("shape must be positive", module="numerics")
    if x < 0:
        raise ArgumentError("x must be non-negative", module="numerics")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_continued_fraction(a, x)


def gammainc_upper(a, x):
    """Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x)."""
    _check_finite(a, x)
    if a <= 0:
        raise ArgumentError("shape must be positive", module="numerics")
    if x < 0:
        raise ArgumentError("x must be non-negative", module="numerics")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_continued_fraction(a, x)


def _gamma_prefactor(a, x):
    return math.exp(a * math.log(x) - x - math.lgamma(a))


def _gamma_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return min(1.0, total * _gamma_prefactor(a, x))
    raise ArithmeticError("incomplete gamma series did not converge")


def _gamma_continued_fraction(a, x):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return min(1.0, h * _gamma_prefactor(a, x))
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b).

    Parameters
    ----------
    a, b : float
        Shape parameters, strictly positive.
    x : float
        Evaluation point in [0, 1].

    Returns
    -------
    float
        I_x(a, b) in [0, 1].
    """
    _check_finite(a, b, x)
    if a <= 0 or b <= 0:
        raise ArgumentError("shape parameters must be positive", module="numerics")
    if x < 0 or x > 1:
        raise ArgumentError("x must lie in [0, 1]", module="numerics")
    if x == 0:
        return 0.0
    if x == 1:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    # The fraction converges fastest below the distribution's mean.
    if x < (a + 1.0) / (a + b + 2.0):
        return min(1.0, math.exp(log_front) * _beta_continued_fraction(a, b, x) / a)
    return max(0.0, 1.0 - math.exp(log_front) * _beta_continued_fraction(b, a, 1.0 - x) / b)


def _beta_continued_fraction(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def chi2_sf(statistic, df):
    """Survival function of the chi-square distribution."""
    if df <= 0:
        raise ArgumentError("degrees of freedom must be positive", module="numerics")
    if statistic <= 0:
        return 1.0
    return gammainc_upper(0.5 * df, 0.5 * statistic)


def normal_sf_two_sided(z):
    """Two-sided standard normal tail probability P(|Z| > |z|)."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def t_sf_two_sided(statistic, df):
    """Two-sided Student-t tail probability P(|T_df| > |t|).

    Infinite degrees of freedom fall back to the normal tail.
    """
    if math.isnan(statistic) or math.isnan(df):
        return float("nan")
    if df <= 0:
        raise ArgumentError("degrees of freedom must be positive", module="numerics")
    if math.isinf(statistic):
        return 0.0
    if math.isinf(df):
        return normal_sf_two_sided(statistic)
    t2 = statistic * statistic
    if t2 == 0:
        return 1.0
    return betainc(0.5 * df, 0.5, df / (df + t2))
