"""Panel container, CSV loading and randomization checks."""

from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_panel
from longsurrogate.errors import (ArgumentError, DataError, DesignViolationError,
                                  SchemaError)
from longsurrogate.panel import (ColumnSpec, ExperimentWindow, arm_mean_differences,
                                 load_panel, observed_effects, pretreatment_balance,
                                 save_panel, srm_counts_test, srm_test)


def _long_frame(n_units=4, t_total=4, d=2, r=1, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for u in range(n_units):
        x = rng.normal(size=r)
        for p in range(t_total + 1):
            row = {"unit_id": f"u{u}", "period": p, "arm": u % 2,
                   "y": np.nan if p == 0 else rng.normal()}
            row.update({f"s{k + 1}": rng.normal() for k in range(d)})
            row.update({f"x{k + 1}": x[k] for k in range(r)})
            rows.append(row)
    return pd.DataFrame(rows)


@pytest.fixture
def panel_csv(tmp_path):
    path = tmp_path / "panel.csv"
    _long_frame().to_csv(path, index=False)
    return path


class TestExperimentWindow:
    def test_valid(self):
        w = ExperimentWindow(3, 10)
        assert w.t_future == 7

    @pytest.mark.parametrize("te,t", [(1, 5), (5, 5), (6, 5)])
    def test_invalid(self, te, t):
        with pytest.raises(ArgumentError):
            ExperimentWindow(te, t)


class TestLoadPanel:
    def test_shapes(self, panel_csv):
        ds = load_panel(panel_csv, (2, 4))
        assert ds.n_units == 4 and ds.d_surrogates == 2 and ds.r_covariates == 1
        assert ds.surrogates.shape == (4, 5, 2)
        assert ds.n_treated == 2 and ds.has_ground_truth
        assert ds.surrogate_names == ("s1", "s2") and ds.covariate_names == ("x1",)

    def test_values_land_in_right_cells(self, panel_csv):
        frame = pd.read_csv(panel_csv)
        ds = load_panel(panel_csv, (2, 4))
        row = frame[(frame.unit_id == "u3") & (frame.period == 2)].iloc[0]
        i = list(ds.unit_ids).index("u3")
        assert ds.outcome_at(2)[i] == row["y"]
        assert ds.surrogates_at(2)[i, 1] == row["s2"]

    def test_future_rows_optional(self, tmp_path):
        frame = _long_frame()
        frame = frame[frame.period <= 2]
        path = tmp_path / "short.csv"
        frame.to_csv(path, index=False)
        ds = load_panel(path, (2, 4))
        assert not ds.has_ground_truth
        assert np.isnan(ds.outcome_at(4)).all()

    def test_negative_periods_are_history(self, tmp_path):
        frame = _long_frame()
        hist = frame[frame.period == 0].assign(period=-1)
        path = tmp_path / "hist.csv"
        pd.concat([hist, frame]).to_csv(path, index=False)
        ds = load_panel(path, (2, 4))
        assert ds.n_history == 1 and ds.outcomes.shape[1] == 6

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_panel(tmp_path / "nope.csv", (2, 4))

    def test_missing_column(self, tmp_path):
        path = tmp_path / "p.csv"
        _long_frame().drop(columns="arm").to_csv(path, index=False)
        with pytest.raises(SchemaError):
            load_panel(path, (2, 4))

    def test_missing_surrogates(self, tmp_path):
        path = tmp_path / "p.csv"
        _long_frame().drop(columns=["s1", "s2"]).to_csv(path, index=False)
        with pytest.raises(SchemaError):
            load_panel(path, (2, 4))

    def test_duplicate_rows(self, tmp_path):
        frame = _long_frame()
        path = tmp_path / "p.csv"
        pd.concat([frame, frame.iloc[[3]]]).to_csv(path, index=False)
        with pytest.raises(DataError, match="duplicate"):
            load_panel(path, (2, 4))

    def test_arm_flip(self, tmp_path):
        frame = _long_frame()
        frame.loc[2, "arm"] = 1 - frame.loc[2, "arm"]
        path = tmp_path / "p.csv"
        frame.to_csv(path, index=False)
        with pytest.raises(DesignViolationError):
            load_panel(path, (2, 4))

    def test_missing_observed_cell(self, tmp_path):
        frame = _long_frame()
        frame.loc[(frame.unit_id == "u1") & (frame.period == 1), "s1"] = np.nan
        path = tmp_path / "p.csv"
        frame.to_csv(path, index=False)
        with pytest.raises(DataError, match="surrogate"):
            load_panel(path, (2, 4))

    def test_missing_observed_row(self, tmp_path):
        frame = _long_frame()
        frame = frame[~((frame.unit_id == "u1") & (frame.period == 2))]
        path = tmp_path / "p.csv"
        frame.to_csv(path, index=False)
        with pytest.raises(DataError):
            load_panel(path, (2, 4))

    def test_period_beyond_horizon(self, panel_csv):
        with pytest.raises(DataError):
            load_panel(panel_csv, (2, 3))

    def test_varying_covariate(self, tmp_path):
        frame = _long_frame()
        frame.loc[1, "x1"] += 1.0
        path = tmp_path / "p.csv"
        frame.to_csv(path, index=False)
        with pytest.raises(DataError, match="covariates"):
            load_panel(path, (2, 4))

    def test_custom_schema(self, tmp_path):
        frame = _long_frame().rename(columns={"unit_id": "user", "y": "revenue"})
        path = tmp_path / "p.csv"
        frame.to_csv(path, index=False)
        ds = load_panel(path, (2, 4), ColumnSpec(unit="user", outcome="revenue"))
        assert ds.outcome_name == "revenue"


class TestRoundTrip:
    @given(seed=st.integers(0, 10_000), history=st.integers(0, 2), r=st.integers(0, 2))
    def test_save_then_load_is_identity(self, tmp_path_factory, seed, history, r):
        ds = make_panel(n_per_arm=5, n_history=history, r=r, seed=seed)
        path = tmp_path_factory.mktemp("rt") / "panel.csv"
        save_panel(ds, path)
        back = load_panel(path, ds.window)
        assert back.equals(ds)

    def test_synthetic_nan_outcome_survives(self, tmp_path, stabilized_small):
        ds = stabilized_small[0].subset(np.arange(10))
        save_panel(ds, tmp_path / "p.csv")
        back = load_panel(tmp_path / "p.csv", ds.window)
        assert back.equals(ds)


class TestDerivedPanels:
    def test_subset_with_duplicates(self, small_panel):
        sub = small_panel.subset([0, 0, 25])
        assert sub.n_units == 3 and len(set(sub.unit_ids)) == 3
        np.testing.assert_array_equal(sub.outcomes[0], sub.outcomes[1])

    def test_swap_arms_negates_differences(self, small_panel):
        a = arm_mean_differences(small_panel, 1, 6)
        b = arm_mean_differences(small_panel.swap_arms(), 1, 6)
        np.testing.assert_allclose(a, -b)

    def test_masked_future(self, small_panel):
        masked = small_panel.masked_future(0.0)
        assert np.all(masked.outcome_range(4, 6) == 0)
        np.testing.assert_array_equal(masked.outcome_range(0, 3),
                                      small_panel.outcome_range(0, 3))

    def test_with_window(self, small_panel):
        short = small_panel.with_window(2, 4)
        assert short.t_total == 4 and short.outcomes.shape[1] == 5
        with pytest.raises(ArgumentError):
            small_panel.with_window(2, 9)

    def test_select_surrogates(self, small_panel):
        one = small_panel.select_surrogates([1])
        assert one.d_surrogates == 1 and one.surrogate_names == ("s2",)
        with pytest.raises(ArgumentError):
            small_panel.select_surrogates([])

    def test_period_out_of_range(self, small_panel):
        with pytest.raises(ArgumentError):
            small_panel.outcome_at(7)

    def test_observed_effects(self, small_panel):
        traj = observed_effects(small_panel)
        assert traj.n_periods == 3 and set(traj.provenance) == {"observed"}
        with pytest.raises(ArgumentError):
            observed_effects(small_panel, through=4)

    def test_needs_both_arms(self, small_panel):
        with pytest.raises(DataError):
            small_panel.with_arms(np.ones(small_panel.n_units))


class TestRandomizationChecks:
    @given(n1=st.integers(1, 10**7), n0=st.integers(1, 10**7), f=st.floats(0.05, 0.95))
    def test_srm_matches_scipy(self, n1, n0, f):
        res = srm_counts_test(n1, n0, f)
        total = n1 + n0
        ref = scipy.stats.chisquare([n1, n0], [f * total, (1 - f) * total])
        assert res.srm_statistic == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
        assert res.srm_p == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-14)

    def test_srm_published_counts(self):
        res = srm_counts_test(667206, 665830)
        assert res.srm_statistic == pytest.approx(1.420, abs=1e-3)
        assert res.srm_p == pytest.approx(0.233, abs=1e-3)

    def test_srm_fraction_domain(self):
        with pytest.raises(ArgumentError):
            srm_counts_test(10, 10, 1.0)

    def test_balance_report(self, small_panel):
        rep = pretreatment_balance(make_panel(r=2))
        assert set(rep.tests) == {"s1@0", "s2@0", "x1", "x2"}
        assert rep.counts == (20, 20) and rep.srm_statistic == 0.0
        assert srm_test(small_panel).srm_p == 1.0

    def test_constant_variable_flagged(self):
        ds = make_panel(r=1)
        ds = replace(ds, covariates=np.ones((ds.n_units, 1)))
        rep = pretreatment_balance(ds)
        assert rep.degenerate == ("x1",)
        assert rep.to_dict()["tests"]["x1"]["degenerate"]
