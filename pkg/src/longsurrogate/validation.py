"""Diagnostics for the surrogacy and comparability assumptions.

* :func:`comparability_test` compares outcomes at two periods within strata
  of binned lagged surrogates, separately per arm.
* :func:`parallel_trends_test` matches units across the two periods and
  tests the arm-by-period interaction in a 2x2 regression.
* :func:`sensitivity_omitted_surrogate` and
  :func:`sensitivity_surrogate_subsets` re-run an estimator on perturbed or
  reduced data and report its error against a known truth.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DiagnosticError
from .estimators.binning import QuantileBinning, encode_states
from .estimators.metrics import compute_metrics
from .estimators.registry import make_estimator
from .numerics.regression import ols_fit
from .numerics.rng import as_stream
from .numerics.stats import coefficient_t_test, welch_t_test

GROUPS = {1: "treatment", 0: "control"}


@dataclass(frozen=True)
class StratumTestSummary:
    """Counts of per-stratum Welch tests for one arm and period pair."""

    group: str
    t: int
    t_prime: int
    delta: int
    n_tests: int
    n_p_below_10: int
    n_p_below_05: int
    n_excluded: int = 0
    n_unmatched: int = 0
    bins_per_dimension: tuple = ()
    strata: tuple = field(default=(), repr=False)

    @property
    def fraction_p_below_10(self):
        return self.n_p_below_10 / self.n_tests if self.n_tests else 0.0

    @property
    def fraction_p_below_05(self):
        return self.n_p_below_05 / self.n_tests if self.n_tests else 0.0

    def to_row(self):
        return [self.group, self.t, self.t_prime, self.n_tests, self.n_p_below_10,
                self.n_p_below_05, round(100 * self.fraction_p_below_10, 2),
                round(100 * self.fraction_p_below_05, 2)]

    def to_dict(self):
        return {"group": self.group, "t": self.t, "t_prime": self.t_prime,
                "delta": self.delta, "n_tests": self.n_tests,
                "n_p10": self.n_p_below_10, "n_p05": self.n_p_below_05,
                "pct10": 100 * self.fraction_p_below_10,
                "pct05": 100 * self.fraction_p_below_05,
                "n_excluded_small": self.n_excluded, "n_unmatched": self.n_unmatched,
                "bins_per_dimension": list(self.bins_per_dimension)}


@dataclass(frozen=True)
class ParallelTrendsResult:
    """Interaction test from the matched 2x2 regression.

    ``coefficients`` are (intercept, arm, period-t, arm x period-t).
    """

    t: int
    t_prime: int
    delta: int
    beta3_hat: float
    standard_error: float
    t_statistic: float
    p_value: float
    reject: bool
    level: float
    matched_pairs: dict
    coefficients: tuple

    def to_dict(self):
        return {"t": self.t, "t_prime": self.t_prime, "delta": self.delta,
                "beta3_hat": self.beta3_hat, "standard_error": self.standard_error,
                "t_statistic": self.t_statistic, "p_value": self.p_value,
                "reject": self.reject, "level": self.level,
                "matched_pairs": self.matched_pairs,
                "coefficients": list(self.coefficients)}


@dataclass(frozen=True)
class SensitivityCurve:
    """Estimator error across a perturbation grid.

    The first grid point is always the unperturbed baseline.
    """

    parameter: str
    grid: tuple
    bias: np.ndarray
    rmse: np.ndarray
    signed_bias: np.ndarray
    trajectories: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {"parameter": self.parameter, "grid": [_jsonable(g) for g in self.grid],
                "bias": self.bias.tolist(), "rmse": self.rmse.tolist(),
                "signed_bias": self.signed_bias.tolist()}


def _jsonable(value):
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def _check_periods(ds, t, t_prime, delta):
    t, t_prime, delta = int(t), int(t_prime), int(delta)
    if t == t_prime:
        raise ArgumentError("t and t_prime must differ", module="validation")
    if delta < 1:
        raise ArgumentError("delta must be at least 1", module="validation")
    if min(t, t_prime) - delta < 0:
        raise ArgumentError("t - delta and t_prime - delta must be >= 0", module="validation")
    if max(t, t_prime) > ds.t_experimental:
        raise ArgumentError("tests use observed periods only (<= T_E)", module="validation")
    return t, t_prime, delta


def _cells(ds, periods, n_bins, use_covariates):
    """State ids at each listed period, from binning fitted on those periods."""
    s = np.stack([ds.surrogates_at(p) for p in periods], axis=1)
    n, p, d = s.shape
    binning = QuantileBinning(n_bins).fit(s.reshape(-1, d))
    codes = binning.transform(s)
    bins = list(binning.bins_per_dimension)
    if use_covariates and ds.r_covariates:
        xb = QuantileBinning(n_bins).fit(ds.covariates)
        xc = xb.transform(ds.covariates)
        codes = np.concatenate([codes, np.broadcast_to(xc[:, None, :], (n, p, xc.shape[1]))],
                               axis=2)
        bins += list(xb.bins_per_dimension)
    ids, _ = encode_states(codes)
    return [ids[:, k] for k in range(p)], tuple(bins)


def comparability_test(ds, t, t_prime, delta=1, n_bins=5, use_covariates=False,
                       min_per_side=2):
    """Stratified Welch tests of Y_t against Y_t' given binned S_{.-delta}.

    For each arm, units are stratified by the binned surrogates ``delta``
    periods earlier (plus covariate cell). Each stratum with at least
    ``min_per_side`` observations in both periods gets a Welch test of the
    period-t outcomes against the period-t' outcomes.

    Returns
    -------
    list of StratumTestSummary
        Treatment first, then control.

    Raises
    ------
    DiagnosticError
        If no stratum in either arm can be tested.
    """
    t, t_prime, delta = _check_periods(ds, t, t_prime, delta)
    (cell_a, cell_b), bins = _cells(ds, (t - delta, t_prime - delta), n_bins, use_covariates)
    ya, yb = ds.outcome_at(t), ds.outcome_at(t_prime)
    out = []
    for w in (1, 0):
        m = ds.arm_mask(w)
        ca, cb, va, vb = cell_a[m], cell_b[m], ya[m], yb[m]
        occupied = np.union1d(ca, cb)
        strata, n10, n05, small, unmatched = [], 0, 0, 0, 0
        order_a, order_b = np.argsort(ca, kind="stable"), np.argsort(cb, kind="stable")
        sa, sb = ca[order_a], cb[order_b]
        for c in occupied:
            xa = va[order_a[np.searchsorted(sa, c):np.searchsorted(sa, c, side="right")]]
            xb = vb[order_b[np.searchsorted(sb, c):np.searchsorted(sb, c, side="right")]]
            if xa.size == 0 or xb.size == 0:
                unmatched += 1
                continue
            if xa.size < min_per_side or xb.size < min_per_side:
                small += 1
                continue
            res = welch_t_test(xa, xb)
            strata.append((int(c), xa.size, xb.size, res.statistic, res.p_value))
            n10 += res.p_value < 0.1
            n05 += res.p_value < 0.05
        out.append(StratumTestSummary(group=GROUPS[w], t=t, t_prime=t_prime, delta=delta,
                                      n_tests=len(strata), n_p_below_10=int(n10),
                                      n_p_below_05=int(n05), n_excluded=small,
                                      n_unmatched=unmatched, bins_per_dimension=bins,
                                      strata=tuple(strata)))
    if all(s.n_tests == 0 for s in out):
        raise DiagnosticError("no stratum has enough observations in both periods; "
                              "use coarser binning", module="validation")
    return out


def _match(cell_from, cell_to, gen):
    """For each 'from' unit, a random 'to' unit index in the same cell (-1 if none)."""
    order = np.argsort(cell_to, kind="stable")
    sorted_cells = cell_to[order]
    lo = np.searchsorted(sorted_cells, cell_from, side="left")
    hi = np.searchsorted(sorted_cells, cell_from, side="right")
    count = hi - lo
    pick = lo + np.floor(gen.random(cell_from.shape[0]) * np.maximum(count, 1)).astype(np.int64)
    return np.where(count > 0, order[np.minimum(pick, order.shape[0] - 1)], -1)


def parallel_trends_test(ds, t, t_prime, delta=1, n_bins=5, seed=0, level=0.05,
                         use_covariates=False):
    """Difference-in-differences test on matched observations.

    Within each arm, every unit observed at period t is paired with one unit
    drawn at random from those whose binned ``S_{t'-delta}`` (and covariate
    cell) equals its binned ``S_{t-delta}``. On the matched observations,
    ``Y ~ 1 + W + 1[period=t] + W*1[period=t]`` is fitted by OLS and the
    interaction coefficient is t-tested.

    Raises
    ------
    DiagnosticError
        If either arm has no matched pairs.
    """
    t, t_prime, delta = _check_periods(ds, t, t_prime, delta)
    (cell_a, cell_b), _ = _cells(ds, (t - delta, t_prime - delta), n_bins, use_covariates)
    ya, yb = ds.outcome_at(t), ds.outcome_at(t_prime)
    stream = as_stream(seed)
    ys, arms, at_t, pairs = [], [], [], {}
    for w in (1, 0):
        idx = np.nonzero(ds.arm_mask(w))[0]
        j = _match(cell_a[idx], cell_b[idx], stream.substream(41, w).generator)
        ok = j >= 0
        n_pairs = int(ok.sum())
        pairs[GROUPS[w]] = n_pairs
        if n_pairs == 0:
            raise DiagnosticError(f"no matched pairs in the {GROUPS[w]} arm; "
                                  "use coarser binning", module="validation")
        ys += [ya[idx[ok]], yb[idx[j[ok]]]]
        arms += [np.full(n_pairs, w), np.full(n_pairs, w)]
        at_t += [np.ones(n_pairs), np.zeros(n_pairs)]
    y = np.concatenate(ys)
    w = np.concatenate(arms).astype(float)
    p = np.concatenate(at_t)
    fit = ols_fit(np.column_stack([w, p, w * p]), y)
    res = coefficient_t_test(fit, 2, levels=(level,))
    return ParallelTrendsResult(
        t=t, t_prime=t_prime, delta=delta,
        beta3_hat=float(fit.coefficients[2]),
        standard_error=float(fit.coefficient_standard_errors[2]),
        t_statistic=res.statistic, p_value=res.p_value, reject=res.p_value < level,
        level=level, matched_pairs=pairs,
        coefficients=(fit.intercept, *map(float, fit.coefficients)))


def omitted_surrogate_variance(ds):
    """Mean over observed periods of the pooled outcome variance."""
    y = ds.outcome_range(1, ds.t_experimental)
    return float(np.mean(y.var(axis=0, ddof=1)))


def sensitivity_omitted_surrogate(ds, estimator, theta_grid, truth, seed=0):
    """Estimator error when an unobserved path shifts treated outcomes.

    Draws ``zeta ~ N(0, v)`` once per unit and period, with ``v`` from
    :func:`omitted_surrogate_variance`, and refits on
    ``Y + theta * zeta * treated`` for each ``theta``. The same draw is
    reused across the grid; ``theta = 0`` refits the untouched panel.
    """
    grid = [float(g) for g in theta_grid]
    if 0.0 not in grid:
        raise ArgumentError("theta grid must contain 0", module="validation")
    grid = [0.0] + [g for g in grid if g != 0.0]
    est = make_estimator(estimator)
    stream = as_stream(seed)
    v = omitted_surrogate_variance(ds)
    zeta = stream.substream(31).generator.normal(0.0, np.sqrt(v), size=ds.outcomes.shape)
    treated = ds.arm_mask(1)[:, None]
    trajs = []
    for theta in grid:
        if theta == 0.0:
            panel = ds
        else:
            panel = ds.with_outcomes(ds.outcomes + theta * zeta * treated)
        trajs.append(est(panel, stream))
    return _curve("theta", grid, trajs, truth)


def sensitivity_surrogate_subsets(ds, estimator, subsets, truth, seed=0):
    """Estimator error when only some surrogates are used.

    ``subsets`` are lists of surrogate names or 0-based indices. The full
    set is always evaluated first; the outcome stays a feature throughout.
    """
    names = list(ds.surrogate_names)
    resolved = []
    for sub in subsets:
        sub = list(sub)
        if not sub:
            raise ArgumentError("surrogate subsets must be non-empty", module="validation")
        idx = []
        for item in sub:
            if isinstance(item, str):
                if item not in names:
                    raise ArgumentError(f"unknown surrogate column {item!r}",
                                        module="validation")
                idx.append(names.index(item))
            else:
                if not 0 <= int(item) < len(names):
                    raise ArgumentError(f"unknown surrogate index {item}", module="validation")
                idx.append(int(item))
        resolved.append(tuple(sorted(set(idx))))
    full = tuple(range(len(names)))
    grid = [full] + [s for s in resolved if s != full]
    est = make_estimator(estimator)
    stream = as_stream(seed)
    trajs = [est(ds if s == full else ds.select_surrogates(s), stream) for s in grid]
    labels = [tuple(names[i] for i in s) for s in grid]
    return _curve("surrogates", labels, trajs, truth)


def _curve(name, grid, trajs, truth):
    mets = [compute_metrics(tr, truth) for tr in trajs]
    return SensitivityCurve(parameter=name, grid=tuple(grid),
                            bias=np.array([m.bias for m in mets]),
                            rmse=np.array([m.rmse for m in mets]),
                            signed_bias=np.array([m.signed_bias for m in mets]),
                            trajectories=tuple(trajs))


@dataclass
class ValidationReport:
    """Collected diagnostics for one panel."""

    comparability: list = field(default_factory=list)
    parallel_trends: list = field(default_factory=list)
    sensitivity: list = field(default_factory=list)
    balance: object = None

    def to_dict(self):
        return {
            "balance": None if self.balance is None else self.balance.to_dict(),
            "comparability": [s.to_dict() for s in self.comparability],
            "parallel_trends": [r.to_dict() for r in self.parallel_trends],
            "sensitivity": [c.to_dict() for c in self.sensitivity],
        }

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["group", "t", "t_prime", "n_tests", "n_p10", "n_p05",
                             "pct10", "pct05"])
            for s in self.comparability:
                writer.writerow(s.to_row())
