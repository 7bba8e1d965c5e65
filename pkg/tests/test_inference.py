"""Permutation test and bootstrap bands."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longsurrogate.errors import ArgumentError, EstimationError, InferenceError
from longsurrogate.estimators import Estimator, estimate_lsm
from longsurrogate.inference import (permutation_test, randomization_bootstrap,
                                     run_replicates, subsample_bootstrap, subsample_indices)
from longsurrogate.numerics.rng import as_stream
from longsurrogate.synthgen import SynthSpec, generate


def failing_every(k):
    """LSM that raises on every k-th call after the first."""
    calls = {"n": 0}

    def est(ds, stream=0):
        calls["n"] += 1
        if calls["n"] > 1 and calls["n"] % k == 0:
            raise EstimationError("synthetic failure", module="estimators")
        return estimate_lsm(ds)

    return est


class TestPermutation:
    def test_threads_do_not_change_result(self, small_panel):
        a = permutation_test(small_panel, "lsm", M=30, seed=5, threads=1)
        b = permutation_test(small_panel, "lsm", M=30, seed=5, threads=3)
        np.testing.assert_array_equal(a.replicate_statistics, b.replicate_statistics)
        assert a.p_value == b.p_value

    def test_single_replicate_p_is_zero_or_one(self, small_panel):
        res = permutation_test(small_panel, "lsm", M=1, seed=2)
        assert res.p_value in (0.0, 1.0) and res.M == 1

    def test_strong_effect_rejects(self):
        ds, _ = generate(SynthSpec(n_per_arm=200, seed=1))
        assert permutation_test(ds, "lsm", M=50, seed=0).p_value == 0.0

    def test_p_value_is_share_exceeding(self, small_panel):
        res = permutation_test(small_panel, "ceb", M=40, seed=3)
        expected = np.mean(np.abs(res.replicate_statistics) > abs(res.observed_statistic))
        assert res.p_value == pytest.approx(expected)

    def test_arm_counts_kept(self, small_panel):
        gen = as_stream(0).substream(1, 0).generator
        perm = small_panel.with_arms(gen.permutation(small_panel.arm))
        assert perm.n_treated == small_panel.n_treated

    def test_period_argument(self, small_panel):
        assert permutation_test(small_panel, "ceb", M=3, period=2).period == 2
        with pytest.raises(ArgumentError):
            permutation_test(small_panel, "ceb", M=3, period=7)
        with pytest.raises(ArgumentError):
            permutation_test(small_panel, "ceb", M=0)

    def test_stochastic_estimator_uses_substreams(self, small_panel):
        est = Estimator("discrete", {"n_bins": 2, "mc_draws": 200, "zero_support": "nearest"})
        a = permutation_test(small_panel, est, M=4, seed=1)
        b = permutation_test(small_panel, est, M=4, seed=1, threads=2)
        np.testing.assert_array_equal(a.replicate_statistics, b.replicate_statistics)


class TestFailures:
    def test_failures_below_limit_are_counted(self, small_panel):
        res = permutation_test(small_panel, failing_every(25), M=40, seed=0)
        assert res.n_failed == 1 and res.n_replicates == 39

    def test_failures_above_limit_raise(self, small_panel):
        with pytest.raises(InferenceError, match="replicates failed"):
            permutation_test(small_panel, failing_every(5), M=40, seed=0)

    def test_run_replicates_keeps_order(self):
        out = run_replicates(lambda m: m * m, 6, threads=3)
        assert out == [0, 1, 4, 9, 16, 25]

    def test_other_exceptions_propagate(self):
        def boom(m):
            raise KeyError(m)

        with pytest.raises(KeyError):
            run_replicates(boom, 2)


class TestSubsampleBootstrap:
    @given(n1=st.integers(2, 40), n0=st.integers(2, 40), fraction=st.floats(0.05, 1.0),
           seed=st.integers(0, 1000))
    @settings(max_examples=30)
    def test_stratified_sizes(self, n1, n0, fraction, seed):
        arm = np.r_[np.ones(n1, dtype=int), np.zeros(n0, dtype=int)]

        class Stub:
            def arm_mask(self, w):
                return arm == w

        idx = subsample_indices(Stub(), fraction, np.random.default_rng(seed))
        assert np.count_nonzero(arm[idx] == 1) == max(1, int(np.floor(fraction * n1)))
        assert np.count_nonzero(arm[idx] == 0) == max(1, int(np.floor(fraction * n0)))

    def test_percentile_band(self, small_panel):
        band = subsample_bootstrap(small_panel, "lsm", replicas=40, seed=2)
        future = band.replicate_estimates[:, 3:]
        np.testing.assert_allclose(band.lower, np.percentile(future, 2.5, axis=0))
        np.testing.assert_allclose(band.upper, np.percentile(future, 97.5, axis=0))
        assert band.lower.shape == (3,) and band.replicas == 40

    def test_threads_do_not_change_band(self, small_panel):
        a = subsample_bootstrap(small_panel, "lsm", replicas=20, seed=4, threads=1)
        b = subsample_bootstrap(small_panel, "lsm", replicas=20, seed=4, threads=3)
        np.testing.assert_array_equal(a.replicate_estimates, b.replicate_estimates)

    def test_apply_and_covers(self, small_panel):
        band = subsample_bootstrap(small_panel, "ceb", replicas=20, seed=0)
        traj = band.apply()
        np.testing.assert_array_equal(traj.lower[3:], band.lower)
        assert band.covers(band.point).all()
        d = band.to_dict(include_replicates=True)
        assert len(d["replicate_estimates"]) == 20 and d["method"] == "subsample_bootstrap"

    @pytest.mark.parametrize("kwargs", [{"fraction": 0.0}, {"fraction": 1.5}, {"replicas": 1}])
    def test_invalid(self, small_panel, kwargs):
        with pytest.raises(ArgumentError):
            subsample_bootstrap(small_panel, "lsm", **kwargs)


class TestRandomizationBootstrap:
    def test_normal_band(self, small_panel):
        band = randomization_bootstrap(small_panel, "lsm", M=30, seed=1)
        sd = band.replicate_estimates[:, 3:].std(axis=0, ddof=1)
        np.testing.assert_allclose(band.upper - band.lower, 2 * 1.959963984540054 * sd)
        np.testing.assert_allclose((band.upper + band.lower) / 2, band.point.estimates[3:])
        assert "variance" in band.to_dict()

    def test_needs_two_replicates(self, small_panel):
        with pytest.raises(ArgumentError):
            randomization_bootstrap(small_panel, "lsm", M=1)
