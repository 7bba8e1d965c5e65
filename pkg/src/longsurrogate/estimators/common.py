"""Shared helpers: regression with a logged ridge fallback, and the
lag-stacked design used by the iterative forecasters."""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, EstimationError, SingularDesignError
from ..numerics.regression import ols_fit, ridge_fit

log = logging.getLogger("longsurrogate.estimators")

RIDGE_FALLBACK = 1e-8


def fit_with_fallback(design, target, label="", events=None, ridge=RIDGE_FALLBACK):
    """OLS, or ridge when the design is singular or has too few rows.

    Each fallback is logged and, if ``events`` is a list, recorded there.
    """
    design = np.asarray(design, dtype=float)
    reason = None
    columns = ()
    if design.shape[0] <= design.shape[1]:
        reason = f"{design.shape[0]} rows for {design.shape[1]} columns"
    else:
        try:
            return ols_fit(design, target)
        except SingularDesignError as exc:
            reason = f"collinear columns {list(exc.columns)}"
            columns = exc.columns
    log.info("ridge fallback (%g) for %s: %s", ridge, label or "fit", reason)
    if events is not None:
        events.append({"fit": label, "fallback": "ridge", "reason": reason})
    fit = ridge_fit(design, target, ridge)
    if not (np.isfinite(fit.intercept) and np.all(np.isfinite(fit.coefficients))):
        raise EstimationError(f"{label}: fit failed after ridge fallback; "
                              f"collinear columns {list(columns)}", module="estimators")
    return fit


def stacked_variables(ds, first, last):
    """Outcome and surrogates for periods first..last, shape (N, P, 1 + D).

    Variable 0 is the outcome; the outcome is treated as one more surrogate.
    """
    y = ds.outcome_range(first, last)[:, :, None]
    s = ds.surrogate_range(first, last)
    return np.concatenate([y, s], axis=2)


def experimental_variables(ds):
    """Stacked variables for the observed periods 1..T_E only."""
    return stacked_variables(ds, 1, ds.t_experimental)


@dataclass(frozen=True)
class LaggedDesign:
    """Per-arm regression design for one-step-ahead forecasting.

    Attributes
    ----------
    arm : int
    features : ndarray (n, V * (T_E - 1) [+ R])
        Variables at periods 1..T_E-1, period-major, then covariates.
    targets : ndarray (n, V)
        Variables at period T_E.
    n_variables : int
    lags : int
        T_E - 1.
    n_covariates : int
    """

    arm: int
    features: np.ndarray
    targets: np.ndarray
    n_variables: int
    lags: int
    n_covariates: int

    @property
    def width(self):
        return self.features.shape[1]

    @property
    def n_rows(self):
        return self.features.shape[0]


def lagged_design(ds, arm, use_covariates=False):
    """Build the lag-stacked design for one arm from observed periods only."""
    te = ds.t_experimental
    if te < 2:
        raise ArgumentError("lagged design needs t_experimental >= 2", module="estimators")
    mask = ds.arm_mask(arm)
    v = experimental_variables(ds)[mask]
    n, _, nv = v.shape
    feats = v[:, :te - 1, :].reshape(n, -1)
    r = 0
    if use_covariates and ds.r_covariates:
        feats = np.concatenate([feats, ds.covariates[mask]], axis=1)
        r = ds.r_covariates
    return LaggedDesign(arm=arm, features=feats, targets=v[:, te - 1, :],
                        n_variables=nv, lags=te - 1, n_covariates=r)


def feature_names(ds, use_covariates=False):
    names = [ds.outcome_name, *ds.surrogate_names]
    cols = [f"{nm}@lag{ds.t_experimental - p}" for p in range(1, ds.t_experimental)
            for nm in names]
    if use_covariates:
        cols += list(ds.covariate_names)
    return cols


def iterate_forecast(history, covariates, t_experimental, t_total, predict):
    """Slide the lag window forward from T_E+1 to T.

    Parameters
    ----------
    history : ndarray (n, T_E, V)
        Observed variables for periods 1..T_E.
    covariates : ndarray (n, R) or None
        Appended to every feature row.
    predict : callable
        Maps a feature matrix (n, F) to next-period variables (n, V).

    Returns
    -------
    ndarray (n, T, V)
        Observed periods followed by forecasts.
    """
    n, te, nv = history.shape
    out = np.empty((n, t_total, nv))
    out[:, :te] = history
    lags = te - 1
    for t in range(te + 1, t_total + 1):
        feats = out[:, t - 1 - lags:t - 1].reshape(n, -1)
        if covariates is not None:
            feats = np.concatenate([feats, covariates], axis=1)
        out[:, t - 1] = predict(feats)
    return out
