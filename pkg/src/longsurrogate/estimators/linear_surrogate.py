"""Linear surrogate model: per-arm lag-stacked regressions iterated forward.

For each arm, every variable at period T_E (the outcome and each surrogate)
is regressed on all variables at periods 1..T_E-1. The outcome regression
is the surrogate index and the others are pivot indices. Forecasts slide
the lag window one period at a time, feeding each unit's own predictions
back in.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError
from ..numerics.regression import tune_elastic_net
from ..panel import arm_mean_differences
from ..trajectory import observed_then_extrapolated
from .common import (experimental_variables, feature_names, fit_with_fallback,
                     iterate_forecast, lagged_design)

log = logging.getLogger("longsurrogate.estimators")

REGULARIZATION_MODES = ("none", "elastic_net")


@dataclass(frozen=True)
class ArmModels:
    """Fitted one-step maps for one arm.

    ``fits[0]`` is the surrogate index (outcome); ``fits[1:]`` are the pivot
    indices, one per surrogate dimension.
    """

    arm: int
    fits: tuple
    coefficients: np.ndarray
    intercepts: np.ndarray
    regularization: str

    @property
    def surrogate_index(self):
        return self.fits[0]

    @property
    def pivot_indices(self):
        return self.fits[1:]

    def predict(self, features):
        return features @ self.coefficients.T + self.intercepts


@dataclass(frozen=True)
class SurrogateModelSet:
    """Surrogate and pivot index fits for both arms."""

    treated: ArmModels
    control: ArmModels
    t_experimental: int
    use_covariates: bool
    regularization: str
    feature_names: tuple
    events: tuple = field(default=())

    def arm(self, w):
        return self.treated if w == 1 else self.control


def _fit_arm(design, regularization, grid_size, folds, events, label):
    fits = []
    for j in range(design.n_variables):
        y = design.targets[:, j]
        name = f"{label}/var{j}"
        if regularization == "elastic_net":
            _, _, fit = tune_elastic_net(design.features, y, grid_size=grid_size, folds=folds)
        else:
            fit = fit_with_fallback(design.features, y, label=name, events=events)
        fits.append(fit)
    coef = np.vstack([f.coefficients for f in fits])
    icpt = np.array([f.intercept for f in fits])
    return ArmModels(arm=design.arm, fits=tuple(fits), coefficients=coef, intercepts=icpt,
                     regularization=regularization)


def fit_linear_surrogate(ds, use_covariates=False, regularization="none",
                         en_grid_size=100, en_folds=5):
    """Fit per-arm surrogate and pivot indices on the observed periods.

    Parameters
    ----------
    ds : PanelDataset
    use_covariates : bool
        Append the unit covariates to every design row.
    regularization : {"none", "elastic_net"}
        With ``"none"``, singular designs fall back to a tiny ridge. An arm
        with no more units than features is switched to the elastic net
        with a warning.
    en_grid_size, en_folds : int
        Cross-validation grid and folds for the elastic net.

    Returns
    -------
    SurrogateModelSet
    """
    if regularization not in REGULARIZATION_MODES:
        raise ArgumentError(f"regularization must be one of {REGULARIZATION_MODES}",
                            module="estimators")
    events = []
    arms = {}
    for w, label in ((1, "treated"), (0, "control")):
        design = lagged_design(ds, w, use_covariates=use_covariates)
        mode = regularization
        if mode == "none" and design.n_rows <= design.width + 1:
            log.warning("%s arm has %d units for %d features; using elastic net",
                        label, design.n_rows, design.width)
            events.append({"fit": label, "fallback": "elastic_net",
                           "reason": f"{design.n_rows} units for {design.width} features"})
            mode = "elastic_net"
        folds = min(en_folds, design.n_rows)
        arms[w] = _fit_arm(design, mode, en_grid_size, max(folds, 2), events, label)
    return SurrogateModelSet(
        treated=arms[1],
        control=arms[0],
        t_experimental=ds.t_experimental,
        use_covariates=use_covariates,
        regularization=regularization,
        feature_names=tuple(feature_names(ds, use_covariates)),
        events=tuple(events),
    )


def forecast_arm_paths(models, ds, arm):
    """Per-unit observed-then-forecast variables for one arm, shape (n, T, V)."""
    mask = ds.arm_mask(arm)
    hist = experimental_variables(ds)[mask]
    cov = ds.covariates[mask] if models.use_covariates and ds.r_covariates else None
    return iterate_forecast(hist, cov, ds.t_experimental, ds.t_total,
                            models.arm(arm).predict)


def forecast_linear_surrogate(models, ds):
    """Extrapolate the effect to T with the fitted models.

    Observed periods report differences in arm means; future periods report
    the mean predicted outcome of treated units minus that of control units.
    """
    if models.t_experimental != ds.t_experimental:
        raise ArgumentError("models were fitted on a different window", module="estimators")
    te = ds.t_experimental
    treated = forecast_arm_paths(models, ds, 1)[:, te:, 0].mean(axis=0)
    control = forecast_arm_paths(models, ds, 0)[:, te:, 0].mean(axis=0)
    options = {"use_covariates": models.use_covariates,
               "regularization": models.regularization}
    return observed_then_extrapolated(arm_mean_differences(ds, 1, te), treated - control,
                                      "lsm", options)


def estimate_lsm(ds, use_covariates=False, regularization="none", en_grid_size=100,
                 en_folds=5):
    """Fit and forecast the linear surrogate model in one call."""
    models = fit_linear_surrogate(ds, use_covariates=use_covariates,
                                  regularization=regularization,
                                  en_grid_size=en_grid_size, en_folds=en_folds)
    return forecast_linear_surrogate(models, ds)
