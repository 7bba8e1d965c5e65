"""Experiment panel data model, CSV ingestion, and randomization checks.

A panel holds one row per unit with the outcome and surrogates indexed by
period. Period 0 is the pre-treatment baseline, periods 1..T_E are the
observed experiment, and T_E+1..T are the future horizon (present only as
benchmarking ground truth). Optional observational history periods
-L..-1 precede the experiment.
"""

import re
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import (ArgumentError, DataError, DesignViolationError,
                     SchemaError)
from .numerics.stats import chi_square_gof, welch_t_test
from .trajectory import OBSERVED, EffectTrajectory

__all__ = [
    "ExperimentWindow",
    "ColumnSpec",
    "PanelDataset",
    "BalanceReport",
    "load_panel",
    "save_panel",
    "srm_test",
    "pretreatment_balance",
    "observed_effects",
]


@dataclass(frozen=True)
class ExperimentWindow:
    """Observed and total period counts (T_E and T)."""

    t_experimental: int
    t_total: int

    def __post_init__(self):
        te, t = int(self.t_experimental), int(self.t_total)
        if te < 2 or te >= t:
            raise ArgumentError(
                f"window needs 2 <= t_experimental < t_total, got ({te}, {t})",
                module="panel")
        object.__setattr__(self, "t_experimental", te)
        object.__setattr__(self, "t_total", t)

    @property
    def t_future(self):
        return self.t_total - self.t_experimental


@dataclass(frozen=True)
class ColumnSpec:
    """Column names of the long-format panel file.

    Surrogate and covariate columns default to every ``s<k>`` and ``x<k>``
    column, ordered by ``k``.
    """

    unit: str = "unit_id"
    period: str = "period"
    arm: str = "arm"
    outcome: str = "y"
    surrogates: tuple | None = None
    covariates: tuple | None = None


def _numbered_columns(columns, prefix):
    pat = re.compile(rf"^{prefix}(\d+)$")
    found = [(int(m.group(1)), c) for c in columns if (m := pat.match(c))]
    return tuple(c for _, c in sorted(found))


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Immutable unit-by-period experiment panel.

    Attributes
    ----------
    window : ExperimentWindow
    unit_ids : ndarray of str, shape (N,)
    arm : ndarray of int8, shape (N,)
        1 for treated, 0 for control, constant over periods.
    covariates : ndarray, shape (N, R)
    surrogates : ndarray, shape (N, L + T + 1, D)
        Column ``p + L`` holds period ``p``.
    outcomes : ndarray, shape (N, L + T + 1)
    n_history : int
        Number of observational periods L before period 0.
    """

    window: ExperimentWindow
    unit_ids: np.ndarray
    arm: np.ndarray
    covariates: np.ndarray
    surrogates: np.ndarray
    outcomes: np.ndarray
    surrogate_names: tuple = ()
    covariate_names: tuple = ()
    outcome_name: str = "y"
    n_history: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arm = np.asarray(self.arm).astype(np.int8)
        s = np.asarray(self.surrogates, dtype=float)
        y = np.asarray(self.outcomes, dtype=float)
        n = arm.shape[0]
        x = np.asarray(self.covariates, dtype=float).reshape(n, -1)
        ids = np.asarray(self.unit_ids).astype(str)
        object.__setattr__(self, "arm", arm)
        object.__setattr__(self, "surrogates", s)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "unit_ids", ids)
        if not self.surrogate_names:
            object.__setattr__(self, "surrogate_names",
                               tuple(f"s{d + 1}" for d in range(s.shape[2])))
        if not self.covariate_names:
            object.__setattr__(self, "covariate_names",
                               tuple(f"x{r + 1}" for r in range(x.shape[1])))
        self._validate()

    def _validate(self):
        n_periods = self.n_history + self.window.t_total + 1
        n = self.arm.shape[0]
        if self.surrogates.ndim != 3 or self.surrogates.shape[:2] != (n, n_periods):
            raise DataError(f"surrogates must have shape (N, {n_periods}, D)",
                            module="panel")
        if self.outcomes.shape != (n, n_periods):
            raise DataError(f"outcomes must have shape (N, {n_periods})", module="panel")
        if self.unit_ids.shape != (n,):
            raise DataError("one unit id per unit required", module="panel")
        if len(set(self.unit_ids.tolist())) != n:
            raise DataError("unit ids must be unique", module="panel")
        if not np.all((self.arm == 0) | (self.arm == 1)):
            raise DataError("arm must be 0 or 1", module="panel")
        if self.n_treated == 0 or self.n_control == 0:
            raise DataError("each arm needs at least one unit", module="panel")
        if len(self.surrogate_names) != self.d_surrogates:
            raise DataError("surrogate_names length must equal D", module="panel")
        if len(self.covariate_names) != self.r_covariates:
            raise DataError("covariate_names length must equal R", module="panel")
        if not np.all(np.isfinite(self.covariates)):
            raise DataError("covariates must be finite", module="panel")

    # sizes -----------------------------------------------------------------
    @property
    def n_units(self):
        return int(self.arm.shape[0])

    @property
    def n_treated(self):
        return int(np.count_nonzero(self.arm == 1))

    @property
    def n_control(self):
        return int(np.count_nonzero(self.arm == 0))

    @property
    def d_surrogates(self):
        return int(self.surrogates.shape[2])

    @property
    def r_covariates(self):
        return int(self.covariates.shape[1])

    @property
    def t_experimental(self):
        return self.window.t_experimental

    @property
    def t_total(self):
        return self.window.t_total

    @property
    def has_ground_truth(self):
        """True when every future-period outcome is present."""
        future = self.outcome_range(self.t_experimental + 1, self.t_total)
        return bool(np.all(np.isfinite(future)))

    # period access -----------------------------------------------------------
    def _col(self, period):
        col = int(period) + self.n_history
        if not 0 <= col < self.outcomes.shape[1]:
            raise ArgumentError(f"period {period} outside the panel", module="panel")
        return col

    def outcome_at(self, period):
        return self.outcomes[:, self._col(period)]

    def surrogates_at(self, period):
        return self.surrogates[:, self._col(period), :]

    def outcome_range(self, first, last):
        """Outcomes for periods first..last inclusive, shape (N, last-first+1)."""
        return self.outcomes[:, self._col(first):self._col(last) + 1]

    def surrogate_range(self, first, last):
        return self.surrogates[:, self._col(first):self._col(last) + 1, :]

    def arm_mask(self, arm):
        return self.arm == arm

    # derived panels -----------------------------------------------------------
    def subset(self, index):
        """Panel restricted to (and reordered by) the given unit indices.

        Repeated indices are allowed; duplicates get suffixed ids.
        """
        index = np.asarray(index, dtype=np.int64)
        ids = self.unit_ids[index]
        if len(set(ids.tolist())) != ids.shape[0]:
            ids = np.array([f"{u}#{k}" for k, u in enumerate(ids)])
        return replace(self, unit_ids=ids, arm=self.arm[index],
                       covariates=self.covariates[index],
                       surrogates=self.surrogates[index],
                       outcomes=self.outcomes[index])

    def with_arms(self, arm):
        return replace(self, arm=np.asarray(arm, dtype=np.int8))

    def swap_arms(self):
        return self.with_arms(1 - self.arm)

    def with_outcomes(self, outcomes):
        return replace(self, outcomes=np.asarray(outcomes, dtype=float))

    def with_window(self, t_experimental, t_total=None):
        """Same data, different experimental cutoff (and optionally horizon)."""
        t_total = self.t_total if t_total is None else int(t_total)
        if t_total > self.t_total:
            raise ArgumentError("cannot extend the horizon beyond the data",
                                module="panel")
        keep = self.n_history + t_total + 1
        return replace(self, window=ExperimentWindow(t_experimental, t_total),
                       surrogates=self.surrogates[:, :keep],
                       outcomes=self.outcomes[:, :keep])

    def select_surrogates(self, indices):
        """Panel keeping only the listed surrogate dimensions (0-based)."""
        indices = [int(i) for i in indices]
        if not indices:
            raise ArgumentError("surrogate subset must be non-empty", module="panel")
        for i in indices:
            if not 0 <= i < self.d_surrogates:
                raise ArgumentError(f"unknown surrogate index {i}", module="panel")
        return replace(self, surrogates=self.surrogates[:, :, indices],
                       surrogate_names=tuple(self.surrogate_names[i] for i in indices))

    def without_covariates(self):
        return replace(self, covariates=np.zeros((self.n_units, 0)), covariate_names=())

    def masked_future(self, fill=np.nan):
        """Copy with every post-T_E outcome and surrogate replaced by ``fill``."""
        start = self._col(self.t_experimental + 1)
        y = self.outcomes.copy()
        s = self.surrogates.copy()
        y[:, start:] = fill
        s[:, start:, :] = fill
        return replace(self, outcomes=y, surrogates=s)

    def equals(self, other, rtol=0.0):
        """Field-by-field equality, NaN matching NaN."""
        if not isinstance(other, PanelDataset):
            return False
        if (self.window != other.window or self.n_history != other.n_history
                or self.surrogate_names != other.surrogate_names
                or self.covariate_names != other.covariate_names):
            return False
        if not (np.array_equal(self.unit_ids, other.unit_ids)
                and np.array_equal(self.arm, other.arm)):
            return False
        for a, b in ((self.covariates, other.covariates),
                     (self.surrogates, other.surrogates),
                     (self.outcomes, other.outcomes)):
            if a.shape != b.shape or not np.allclose(a, b, rtol=rtol, atol=0.0,
                                                     equal_nan=True):
                return False
        return True


# ---------------------------------------------------------------------------
# CSV input / output


def load_panel(path, window, schema=None):
    """Read a long-format panel CSV.

    Parameters
    ----------
    path : str or Path
    window : ExperimentWindow or tuple of (t_experimental, t_total)
    schema : ColumnSpec, optional

    Returns
    -------
    PanelDataset

    Raises
    ------
    SchemaError
        A required column is missing.
    DataError
        Duplicate (unit, period) rows, missing observed cells, periods out of
        range, or covariates varying within a unit.
    DesignViolationError
        A unit's arm changes across periods.
    """
    if not isinstance(window, ExperimentWindow):
        window = ExperimentWindow(*window)
    schema = schema or ColumnSpec()
    try:
        df = pd.read_csv(path, dtype={schema.unit: str}, keep_default_na=False,
                         na_values=[""], float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"panel file not found: {path}", module="panel") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse panel file {path}: {exc}", module="panel") from exc
    cols = list(df.columns)
    s_cols = schema.surrogates or _numbered_columns(cols, "s")
    x_cols = schema.covariates if schema.covariates is not None else _numbered_columns(cols, "x")
    if not s_cols:
        raise SchemaError("missing surrogate column 's1'", module="panel")
    for name in (schema.unit, schema.period, schema.arm, schema.outcome, *s_cols, *x_cols):
        if name not in df.columns:
            raise SchemaError(f"missing column {name!r}", module="panel")
    if df.empty:
        raise DataError("panel file has no rows", module="panel")

    try:
        periods = df[schema.period].to_numpy(dtype=np.int64)
        arms = df[schema.arm].to_numpy(dtype=float)
        values = df[[schema.outcome, *s_cols, *x_cols]].to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise DataError(f"non-numeric value in panel: {exc}", module="panel") from exc

    if df.duplicated([schema.unit, schema.period]).any():
        row = df[df.duplicated([schema.unit, schema.period])].iloc[0]
        raise DataError(
            f"duplicate row for unit {row[schema.unit]!r} period {row[schema.period]}",
            module="panel")
    if not np.all(np.isin(arms, (0.0, 1.0))):
        raise DataError("arm values must be 0 or 1", module="panel")

    codes, uniques = pd.factorize(df[schema.unit], sort=False)
    n = uniques.shape[0]
    arm_min = np.full(n, 2.0)
    arm_max = np.full(n, -1.0)
    np.minimum.at(arm_min, codes, arms)
    np.maximum.at(arm_max, codes, arms)
    flips = np.nonzero(arm_min != arm_max)[0]
    if flips.size:
        raise DesignViolationError(
            f"unit {uniques[flips[0]]!r} changes arm across periods; "
            "assignment must be constant", module="panel")

    p_min, p_max = int(periods.min()), int(periods.max())
    if p_min > 0:
        raise DataError("period 0 (pre-treatment) rows are required", module="panel")
    if p_max > window.t_total:
        raise DataError(f"period {p_max} exceeds t_total={window.t_total}", module="panel")
    n_history = -p_min
    n_periods = n_history + window.t_total + 1
    d, r = len(s_cols), len(x_cols)
    y = np.full((n, n_periods), np.nan)
    s = np.full((n, n_periods, d), np.nan)
    present = np.zeros((n, n_periods), dtype=bool)
    col = periods + n_history
    y[codes, col] = values[:, 0]
    s[codes, col, :] = values[:, 1:1 + d]
    present[codes, col] = True

    x = np.zeros((n, r))
    if r:
        xv = values[:, 1 + d:]
        if not np.all(np.isfinite(xv)):
            raise DataError("covariate values must be present in every row", module="panel")
        first = np.zeros(n, dtype=np.int64)
        order = np.arange(len(codes))[::-1]
        first[codes[order]] = order
        x = xv[first]
        varying = np.nonzero(np.any(xv != x[codes], axis=1))[0]
        if varying.size:
            u = uniques[codes[varying[0]]]
            raise DataError(f"covariates vary across periods for unit {u!r}",
                            module="panel")

    te_col = n_history + window.t_experimental
    missing_row = ~present[:, :te_col + 1]
    if missing_row.any():
        i, c = np.argwhere(missing_row)[0]
        raise DataError(f"unit {uniques[i]!r} has no row for observed period {c - n_history}",
                        module="panel")
    bad_s = ~np.isfinite(s[:, :te_col + 1, :]).all(axis=2)
    if bad_s.any():
        i, c = np.argwhere(bad_s)[0]
        raise DataError(f"missing surrogate for unit {uniques[i]!r} period {c - n_history}",
                        module="panel")
    bad_y = ~np.isfinite(y[:, n_history + 1:te_col + 1])
    if bad_y.any():
        i, c = np.argwhere(bad_y)[0]
        raise DataError(f"missing outcome for unit {uniques[i]!r} period {c + 1}",
                        module="panel")

    return PanelDataset(
        window=window,
        unit_ids=np.asarray(uniques, dtype=str),
        arm=arm_min.astype(np.int8),
        covariates=x,
        surrogates=s,
        outcomes=y,
        surrogate_names=tuple(s_cols),
        covariate_names=tuple(x_cols),
        outcome_name=schema.outcome,
        n_history=n_history,
    )


def save_panel(ds, path, schema=None):
    """Write ``ds`` in the long CSV format read by :func:`load_panel`."""
    schema = schema or ColumnSpec()
    n = ds.n_units
    n_periods = ds.outcomes.shape[1]
    periods = np.arange(-ds.n_history, ds.t_total + 1)
    frame = {
        schema.unit: np.repeat(ds.unit_ids, n_periods),
        schema.period: np.tile(periods, n),
        schema.arm: np.repeat(ds.arm, n_periods).astype(int),
        schema.outcome: ds.outcomes.reshape(-1),
    }
    for d, name in enumerate(ds.surrogate_names):
        frame[name] = ds.surrogates[:, :, d].reshape(-1)
    for k, name in enumerate(ds.covariate_names):
        frame[name] = np.repeat(ds.covariates[:, k], n_periods)
    pd.DataFrame(frame).to_csv(path, index=False, float_format="%.17g", na_rep="",
                               lineterminator="\n")


# ---------------------------------------------------------------------------
# Randomization checks


@dataclass(frozen=True)
class BalanceReport:
    """Sample-ratio-mismatch test plus per-variable balance tests.

    ``tests`` maps a variable label to its Welch :class:`TestResult`.
    """

    srm_statistic: float
    srm_p: float
    counts: tuple
    expected_treated_fraction: float
    tests: dict = field(default_factory=dict)

    @property
    def degenerate(self):
        return tuple(k for k, v in self.tests.items() if v.degenerate)

    def to_dict(self):
        return {
            "srm_statistic": self.srm_statistic,
            "srm_p": self.srm_p,
            "counts": {"treated": self.counts[0], "control": self.counts[1]},
            "expected_treated_fraction": self.expected_treated_fraction,
            "tests": {k: v.to_dict() for k, v in self.tests.items()},
        }


def srm_counts_test(n_treated, n_control, expected_treated_fraction=0.5):
    """Chi-square test of arm counts against the design ratio."""
    f = float(expected_treated_fraction)
    if not 0.0 < f < 1.0:
        raise ArgumentError("expected_treated_fraction must lie in (0, 1)",
                            module="panel")
    total = n_treated + n_control
    res = chi_square_gof([n_treated, n_control], [f * total, (1.0 - f) * total])
    return BalanceReport(res.statistic, res.p_value, (int(n_treated), int(n_control)), f)


def srm_test(ds, expected_treated_fraction=0.5):
    """Sample-ratio-mismatch chi-square test (1 df) on the arm counts."""
    return srm_counts_test(ds.n_treated, ds.n_control, expected_treated_fraction)


def pretreatment_balance(ds, expected_treated_fraction=0.5):
    """SRM test plus Welch t-tests on period-0 surrogates and covariates."""
    report = srm_test(ds, expected_treated_fraction)
    treated = ds.arm_mask(1)
    tests = {}
    s0 = ds.surrogates_at(0)
    for d, name in enumerate(ds.surrogate_names):
        tests[f"{name}@0"] = welch_t_test(s0[treated, d], s0[~treated, d])
    for k, name in enumerate(ds.covariate_names):
        tests[name] = welch_t_test(ds.covariates[treated, k], ds.covariates[~treated, k])
    return replace(report, tests=tests)


def arm_mean_differences(ds, first, last):
    """Treated-minus-control difference in mean outcome for each period."""
    y = ds.outcome_range(first, last)
    treated = ds.arm_mask(1)
    return y[treated].mean(axis=0) - y[~treated].mean(axis=0)


def observed_effects(ds, through=None):
    """Difference in arm means of the outcome for periods 1..through.

    ``through`` defaults to T_E and may not exceed it.
    """
    through = ds.t_experimental if through is None else int(through)
    if not 1 <= through <= ds.t_experimental:
        raise ArgumentError(f"through must lie in 1..{ds.t_experimental}", module="panel")
    est = arm_mean_differences(ds, 1, through)
    return EffectTrajectory(est, (OBSERVED,) * through, estimator="observed")
