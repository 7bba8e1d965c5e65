"""Resampling inference around any trajectory estimator.

Three procedures share one replicate engine:

* permutation test of the sharp null (arm labels re-randomized, counts kept)
* randomization bootstrap (variance of re-randomized estimates, normal band)
* subsample bootstrap (units resampled with replacement within each arm,
  percentile band)

Replicate ``m`` always draws from substream ``m`` of the seed, and results
are merged by replicate index, so output does not depend on ``threads``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .errors import ArgumentError, InferenceError, LongSurrogateError
from .estimators.registry import make_estimator
from .numerics.rng import as_stream

log = logging.getLogger("longsurrogate.inference")

MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class PermutationResult:
    """Sharp-null permutation test outcome.

    ``p_value`` is the share of successful replicates whose absolute
    statistic strictly exceeds the observed absolute statistic.
    """

    observed_statistic: float
    replicate_statistics: np.ndarray
    p_value: float
    n_replicates: int
    n_failed: int
    period: int

    @property
    def M(self):
        return self.n_replicates

    def to_dict(self, include_replicates=False):
        out = {"observed_statistic": self.observed_statistic, "p_value": self.p_value,
               "replicates": self.n_replicates, "failed": self.n_failed,
               "period": self.period,
               "replicate_summary": _summary(self.replicate_statistics)}
        if include_replicates:
            out["replicate_statistics"] = [float(v) for v in self.replicate_statistics]
        return out


@dataclass(frozen=True)
class CIBand:
    """Confidence band over the future periods T_E+1..T.

    Attributes
    ----------
    lower, upper : ndarray
    level : float
    method : str
        ``"randomization_bootstrap"`` or ``"subsample_bootstrap"``.
    replicas : int
        Successful replicates used.
    point : EffectTrajectory
        Full-sample estimate.
    replicate_estimates : ndarray (replicas, T)
    variance : ndarray or None
        Replicate variance per future period (randomization bootstrap).
    n_failed : int
    """

    lower: np.ndarray
    upper: np.ndarray
    level: float
    method: str
    replicas: int
    point: object
    replicate_estimates: np.ndarray = field(repr=False)
    variance: np.ndarray | None = None
    n_failed: int = 0

    def apply(self, trajectory=None):
        """Trajectory (default the point estimate) carrying this band."""
        traj = self.point if trajectory is None else trajectory
        return traj.with_band(self.lower, self.upper, method=self.method, level=self.level,
                              replicas=self.replicas)

    def covers(self, truth):
        """Per-period indicator that the truth lies inside the band."""
        true = np.asarray(getattr(truth, "estimates", truth), dtype=float)
        fut = true[true.shape[0] - self.lower.shape[0]:]
        return (self.lower <= fut) & (fut <= self.upper)

    def to_dict(self, include_replicates=False):
        out = {"method": self.method, "level": self.level, "replicas": self.replicas,
               "failed": self.n_failed, "lower": self.lower.tolist(),
               "upper": self.upper.tolist(),
               "replicate_summary": {
                   "mean": self.replicate_estimates.mean(axis=0).tolist(),
                   "sd": (self.replicate_estimates.std(axis=0, ddof=1).tolist()
                          if self.replicas > 1 else None)}}
        if self.variance is not None:
            out["variance"] = self.variance.tolist()
        if include_replicates:
            out["replicate_estimates"] = self.replicate_estimates.tolist()
        return out


def _summary(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {}
    return {"mean": float(values.mean()), "sd": float(values.std()),
            "min": float(values.min()), "max": float(values.max())}


def run_replicates(task, n, threads=1):
    """Evaluate ``task(m)`` for m = 0..n-1; failures become ``None``.

    Estimation errors are counted, not raised. Results keep index order.
    """

    def safe(m):
        try:
            return task(m)
        except (LongSurrogateError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.info("replicate %d failed: %s", m, exc)
            return None

    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(safe, range(n)))
    return [safe(m) for m in range(n)]


def _collect(results, n):
    ok = [r for r in results if r is not None]
    failed = n - len(ok)
    if n and failed / n > MAX_FAILURE_RATE:
        raise InferenceError(f"{failed} of {n} replicates failed "
                             f"({failed / n:.1%} > {MAX_FAILURE_RATE:.0%})", module="inference")
    return ok, failed


def _relabel(ds, gen):
    return ds.with_arms(gen.permutation(ds.arm))


def _statistic_period(ds, period):
    period = ds.t_total if period is None else int(period)
    if not 1 <= period <= ds.t_total:
        raise ArgumentError(f"period must lie in 1..{ds.t_total}", module="inference")
    return period


def permutation_test(ds, estimator, M=200, seed=0, period=None, threads=1):
    """Test the sharp null of no effect in any period.

    Arm labels are redrawn M times with the arm counts held fixed while the
    outcomes and surrogates stay in place. The statistic is the estimated
    effect at ``period`` (default T).
    """
    if M < 1:
        raise ArgumentError("M must be positive", module="inference")
    est = make_estimator(estimator)
    stream = as_stream(seed)
    period = _statistic_period(ds, period)
    observed = est(ds, stream.substream(0)).at(period)

    def task(m):
        perm = _relabel(ds, stream.substream(1, m).generator)
        return est(perm, stream.substream(2, m)).at(period)

    reps, failed = _collect(run_replicates(task, M, threads), M)
    reps = np.asarray(reps, dtype=float)
    p = float(np.count_nonzero(np.abs(reps) > abs(observed)) / reps.size) if reps.size else 1.0
    return PermutationResult(observed_statistic=float(observed), replicate_statistics=reps,
                             p_value=p, n_replicates=int(reps.size), n_failed=failed,
                             period=period)


def randomization_bootstrap(ds, estimator, M=200, seed=0, level=0.95, threads=1):
    """Normal-approximation band from re-randomized arm labels.

    The standard deviation of the estimate across M relabelings gives the
    band ``estimate +/- z * sd`` for every future period.
    """
    if M < 2:
        raise ArgumentError("at least 2 replicates are needed", module="inference")
    est = make_estimator(estimator)
    stream = as_stream(seed)
    point = est(ds, stream.substream(0))

    def task(m):
        perm = _relabel(ds, stream.substream(1, m).generator)
        return est(perm, stream.substream(2, m)).estimates

    reps, failed = _collect(run_replicates(task, M, threads), M)
    if len(reps) < 2:
        raise InferenceError("fewer than 2 successful replicates", module="inference")
    reps = np.vstack(reps)
    te = point.t_experimental
    var = reps[:, te:].var(axis=0, ddof=1)
    z = NormalDist().inv_cdf(0.5 + level / 2)
    centre = point.estimates[te:]
    sd = np.sqrt(var)
    return CIBand(lower=centre - z * sd, upper=centre + z * sd, level=level,
                  method="randomization_bootstrap", replicas=reps.shape[0], point=point,
                  replicate_estimates=reps, variance=var, n_failed=failed)


def subsample_indices(ds, fraction, gen):
    """Within each arm, floor(fraction * n_arm) (at least 1) draws with replacement."""
    parts = []
    for w in (1, 0):
        idx = np.nonzero(ds.arm_mask(w))[0]
        size = max(1, int(np.floor(fraction * idx.size)))
        parts.append(idx[gen.integers(0, idx.size, size=size)])
    return np.sort(np.concatenate(parts))


def subsample_bootstrap(ds, estimator, replicas=100, fraction=0.5, seed=0, level=0.95,
                        threads=1):
    """Percentile band from refits on resampled units.

    Each replica resamples a ``fraction`` of every arm with replacement and
    refits the estimator. The band takes the (1-level)/2 and (1+level)/2
    empirical percentiles per future period.
    """
    if not 0.0 < fraction <= 1.0:
        raise ArgumentError("fraction must lie in (0, 1]", module="inference")
    if replicas < 2:
        raise ArgumentError("at least 2 replicas are needed", module="inference")
    est = make_estimator(estimator)
    stream = as_stream(seed)
    point = est(ds, stream.substream(0))

    def task(m):
        idx = subsample_indices(ds, fraction, stream.substream(3, m).generator)
        return est(ds.subset(idx), stream.substream(4, m)).estimates

    reps, failed = _collect(run_replicates(task, replicas, threads), replicas)
    if len(reps) < 2:
        raise InferenceError("fewer than 2 successful replicas", module="inference")
    reps = np.vstack(reps)
    te = point.t_experimental
    alpha = (1.0 - level) / 2.0
    lower = np.percentile(reps[:, te:], 100 * alpha, axis=0)
    upper = np.percentile(reps[:, te:], 100 * (1 - alpha), axis=0)
    return CIBand(lower=lower, upper=upper, level=level, method="subsample_bootstrap",
                  replicas=reps.shape[0], point=point, replicate_estimates=reps,
                  n_failed=failed)
