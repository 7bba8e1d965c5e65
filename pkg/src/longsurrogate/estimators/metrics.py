"""Bias and mean squared error against a known effect trajectory."""

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError


@dataclass(frozen=True)
class Metrics:
    """Error summary over the future periods T_E+1..T.

    ``bias`` is the mean absolute error and ``signed_bias`` the mean signed
    error. ``mse`` averages squared errors over replicas and periods when
    replicas are supplied, otherwise over periods of the point estimate.
    """

    bias: float
    signed_bias: float
    mse: float
    rmse: float
    n_replicas: int

    def to_dict(self):
        return {"bias": self.bias, "signed_bias": self.signed_bias, "mse": self.mse,
                "rmse": self.rmse, "n_replicas": self.n_replicas}


def _values(obj):
    if hasattr(obj, "estimates"):
        return np.asarray(obj.estimates, dtype=float)
    return np.asarray(obj, dtype=float)


def compute_metrics(est, truth, replicas=None, t_experimental=None):
    """Compare an estimated trajectory with the truth over future periods.

    Parameters
    ----------
    est : EffectTrajectory
    truth : EffectTrajectory, TruthOracle or array-like
        True effect for periods 1..T.
    replicas : sequence of EffectTrajectory or array (M, T), optional
    t_experimental : int, optional
        Defaults to the number of observed periods in ``est``.

    Returns
    -------
    Metrics
    """
    point = _values(est)
    true = _values(truth)
    if point.shape != true.shape:
        raise ArgumentError(f"estimate covers {point.shape[0]} periods, truth "
                            f"{true.shape[0]}", module="estimators")
    te = est.t_experimental if t_experimental is None else int(t_experimental)
    err = point[te:] - true[te:]
    if err.size == 0:
        raise ArgumentError("no future periods to score", module="estimators")
    n_rep = 0
    if replicas is not None and len(replicas):
        reps = np.vstack([_values(r) for r in replicas])
        if reps.shape[1] != true.shape[0]:
            raise ArgumentError("replicas must cover the same periods", module="estimators")
        mse = float(np.mean((reps[:, te:] - true[te:]) ** 2))
        n_rep = reps.shape[0]
    else:
        mse = float(np.mean(err**2))
    return Metrics(bias=float(np.mean(np.abs(err))), signed_bias=float(np.mean(err)),
                   mse=mse, rmse=float(np.sqrt(mse)), n_replicas=n_rep)
