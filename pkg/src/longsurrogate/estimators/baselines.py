"""Constant-extrapolation and vector-autoregression baselines."""

import numpy as np

from ..errors import ArgumentError
from ..numerics.rng import as_stream
from ..panel import arm_mean_differences
from ..trajectory import observed_then_extrapolated
from .common import experimental_variables, fit_with_fallback


def estimate_ceb(ds):
    """Carry the mean observed effect over 1..T_E forward unchanged."""
    te = ds.t_experimental
    observed = arm_mean_differences(ds, 1, te)
    future = np.full(ds.t_total - te, observed.mean())
    return observed_then_extrapolated(observed, future, "ceb")


def _var_fit(series, order, events, label):
    """Per-equation least squares for a VAR(order) with intercept.

    ``series`` has shape (P, K). Returns (intercepts (K,), coefficients (K, K*order)).
    Lag blocks are ordered most recent first.
    """
    n, k = series.shape
    rows = np.array([np.concatenate([series[t - j] for j in range(1, order + 1)])
                     for t in range(order, n)])
    icpt = np.empty(k)
    coef = np.empty((k, k * order))
    for j in range(k):
        fit = fit_with_fallback(rows, series[order:, j], label=f"{label}/eq{j}",
                                events=events)
        icpt[j] = fit.intercept
        coef[j] = fit.coefficients
    return icpt, coef


def _var_forecast(series, order, icpt, coef, horizon):
    path = [row for row in series]
    for _ in range(horizon - len(series)):
        lagged = np.concatenate([path[-j] for j in range(1, order + 1)])
        path.append(icpt + coef @ lagged)
    return np.array(path)


def select_var_variables(n_surrogates, order, seed):
    """Variable indices for the VAR: the outcome (0) plus surrogates.

    When the lag order is smaller than the number of variables, the outcome
    is kept with ``order - 1`` surrogates drawn without replacement.
    """
    if order >= n_surrogates + 1:
        return list(range(n_surrogates + 1))
    gen = as_stream(seed).substream(11).generator
    picks = gen.choice(n_surrogates, size=order - 1, replace=False) + 1 if order > 1 else []
    return [0] + sorted(int(p) for p in picks)


def estimate_var(ds, seed=0):
    """VAR(T_E - 2) on arm-mean series of the outcome and surrogates.

    Each arm's series of period means over 1..T_E is fitted separately and
    iterated to T; the effect is the difference of outcome forecasts.
    With T_E = 2 the lag order is zero and the constant-extrapolation
    baseline is returned instead.
    """
    te = ds.t_experimental
    if te < 2:
        raise ArgumentError("VAR needs t_experimental >= 2", module="estimators")
    order = te - 2
    if order == 0:
        ceb = estimate_ceb(ds)
        return observed_then_extrapolated(ceb.estimates[:te], ceb.estimates[te:], "var",
                                          {"order": 0, "fallback": "ceb"})
    variables = select_var_variables(ds.d_surrogates, order, seed)
    v = experimental_variables(ds)[:, :, variables]
    events = []
    forecasts = {}
    for w, label in ((1, "treated"), (0, "control")):
        series = v[ds.arm_mask(w)].mean(axis=0)
        icpt, coef = _var_fit(series, order, events, f"var/{label}")
        forecasts[w] = _var_forecast(series, order, icpt, coef, ds.t_total)[:, 0]
    future = forecasts[1][te:] - forecasts[0][te:]
    options = {"order": order, "variables": variables, "seed": int(as_stream(seed).seed),
               "ridge_fallbacks": len(events)}
    return observed_then_extrapolated(arm_mean_differences(ds, 1, te), future, "var", options)
