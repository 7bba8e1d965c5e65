"""Special functions, regression solvers, hypothesis tests and RNG streams."""

import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from longsurrogate.errors import ArgumentError, ConvergenceError, SingularDesignError
from longsurrogate.numerics import (RandomStream, as_stream, betainc, chi2_sf,
                                    chi_square_gof, coefficient_t_test, elastic_net_fit,
                                    gammainc_lower, gammainc_upper, normal_sf_two_sided,
                                    ols_fit, ridge_fit, t_sf_two_sided, tune_elastic_net,
                                    welch_t_test)

positive = st.floats(0.05, 60.0, allow_nan=False)
unit = st.floats(0.0, 1.0, allow_nan=False)


class TestSpecialFunctions:
    @given(a=positive, x=st.floats(0.0, 120.0))
    def test_incomplete_gamma_matches_scipy(self, a, x):
        assert gammainc_lower(a, x) == pytest.approx(scipy.special.gammainc(a, x),
                                                     rel=1e-9, abs=1e-13)
        assert gammainc_upper(a, x) == pytest.approx(scipy.special.gammaincc(a, x),
                                                     rel=1e-9, abs=1e-13)

    @given(a=positive, x=st.floats(0.0, 120.0))
    def test_incomplete_gamma_halves_sum_to_one(self, a, x):
        assert gammainc_lower(a, x) + gammainc_upper(a, x) == pytest.approx(1.0, abs=1e-12)

    @given(a=positive, b=positive, x=unit)
    def test_incomplete_beta_matches_scipy(self, a, b, x):
        assert betainc(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x),
                                                 rel=1e-8, abs=1e-13)

    @given(a=positive, b=positive, x=st.floats(1e-6, 1 - 1e-6))
    def test_incomplete_beta_reflection(self, a, b, x):
        assert betainc(a, b, x) + betainc(b, a, 1 - x) == pytest.approx(1.0, abs=1e-11)

    @pytest.mark.parametrize("a,x", [(-1.0, 1.0), (1.0, -0.5)])
    def test_gamma_domain(self, a, x):
        with pytest.raises(ArgumentError):
            gammainc_lower(a, x)

    def test_beta_endpoints(self):
        assert betainc(2.0, 3.0, 0.0) == 0.0
        assert betainc(2.0, 3.0, 1.0) == 1.0
        with pytest.raises(ArgumentError):
            betainc(2.0, 3.0, 1.5)

    @given(stat=st.floats(0.0, 200.0), df=st.integers(1, 80))
    def test_chi2_tail(self, stat, df):
        assert chi2_sf(stat, df) == pytest.approx(scipy.stats.chi2.sf(stat, df),
                                                  rel=1e-8, abs=1e-14)

    @given(stat=st.floats(-40.0, 40.0), df=st.floats(0.5, 500.0))
    def test_student_two_sided_tail(self, stat, df):
        assert t_sf_two_sided(stat, df) == pytest.approx(
            2 * scipy.stats.t.sf(abs(stat), df), rel=1e-7, abs=1e-14)

    def test_infinite_df_is_normal(self):
        assert t_sf_two_sided(1.96, np.inf) == pytest.approx(normal_sf_two_sided(1.96))
        assert normal_sf_two_sided(1.959963984540054) == pytest.approx(0.05, abs=1e-12)


def _design(seed, n=60, p=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = 1.5 + X @ np.arange(1, p + 1) + rng.normal(scale=0.3, size=n)
    return X, y


class TestOrdinaryLeastSquares:
    def test_matches_statsmodels(self):
        sm = pytest.importorskip("statsmodels.api")
        X, y = _design(0)
        fit = ols_fit(X, y)
        ref = sm.OLS(y, sm.add_constant(X)).fit()
        np.testing.assert_allclose(fit.coefficients, ref.params[1:], rtol=1e-10)
        assert fit.intercept == pytest.approx(ref.params[0], rel=1e-10)
        np.testing.assert_allclose(fit.coefficient_standard_errors, ref.bse[1:], rtol=1e-8)
        assert fit.intercept_standard_error == pytest.approx(ref.bse[0], rel=1e-8)
        assert fit.residual_variance == pytest.approx(ref.scale, rel=1e-10)

    def test_weighted_matches_statsmodels(self):
        sm = pytest.importorskip("statsmodels.api")
        X, y = _design(1)
        w = np.random.default_rng(1).uniform(0.5, 2.0, size=y.size)
        fit = ols_fit(X, y, weights=w)
        ref = sm.WLS(y, sm.add_constant(X), weights=w).fit()
        np.testing.assert_allclose(fit.coefficients, ref.params[1:], rtol=1e-9)

    @given(seed=st.integers(0, 10_000), p=st.integers(1, 5))
    def test_residuals_orthogonal_to_design(self, seed, p):
        X, y = _design(seed, n=40, p=p)
        fit = ols_fit(X, y)
        resid = y - fit.predict(X)
        assert abs(resid.sum()) < 1e-8
        np.testing.assert_allclose(X.T @ resid, 0.0, atol=1e-8)

    def test_rank_deficiency_names_columns(self):
        X, y = _design(2)
        X = np.column_stack([X, X[:, 0] + X[:, 1]])
        with pytest.raises(SingularDesignError) as info:
            ols_fit(X, y)
        assert len(info.value.columns) == 1

    def test_too_few_rows(self):
        X, y = _design(3, n=3, p=3)
        with pytest.raises(ArgumentError):
            ols_fit(X, y)

    def test_non_finite_rejected(self):
        X, y = _design(4)
        y[0] = np.nan
        with pytest.raises(ArgumentError):
            ols_fit(X, y)


class TestRidge:
    def test_zero_penalty_is_ols(self):
        X, y = _design(5)
        np.testing.assert_allclose(ridge_fit(X, y, 0.0).coefficients,
                                   ols_fit(X, y).coefficients, rtol=1e-9)

    def test_scale_free_penalty(self):
        X, y = _design(6)
        a = ridge_fit(X, y, 0.3).coefficients
        b = ridge_fit(X * 1000.0, y, 0.3).coefficients * 1000.0
        np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_shrinks_towards_zero(self):
        X, y = _design(7)
        norms = [np.linalg.norm(ridge_fit(X, y, lam).coefficients) for lam in (0, 0.1, 1, 10)]
        assert all(b < a for a, b in zip(norms, norms[1:]))


class TestElasticNet:
    def _kkt_gap(self, fit, X, y):
        Z = (X - X.mean(0)) / X.std(0)
        beta = fit.extra["standardized_coefficients"]
        lam, alpha = fit.penalty_weight, fit.l1_ratio
        grad = Z.T @ (y - y.mean() - Z @ beta) / len(y) - lam * (1 - alpha) * beta
        active = beta != 0
        gap = np.abs(grad[active] - lam * alpha * np.sign(beta[active]))
        slack = np.abs(grad[~active]) - lam * alpha
        return max(gap.max(initial=0.0), slack.max(initial=0.0))

    @given(seed=st.integers(0, 1000), lam=st.floats(0.0, 2.0), alpha=unit)
    def test_kkt_conditions(self, seed, lam, alpha):
        X, y = _design(seed)
        fit = elastic_net_fit(X, y, lam, alpha, tol=1e-10)
        assert self._kkt_gap(fit, X, y) < 1e-6

    def test_matches_sklearn_on_standardized_columns(self):
        linear_model = pytest.importorskip("sklearn.linear_model")
        X, y = _design(8, p=5)
        Z = (X - X.mean(0)) / X.std(0)
        ref = linear_model.ElasticNet(alpha=0.2, l1_ratio=0.7, tol=1e-12,
                                      max_iter=100_000).fit(Z, y)
        fit = elastic_net_fit(X, y, 0.2, 0.7, tol=1e-12)
        np.testing.assert_allclose(fit.extra["standardized_coefficients"], ref.coef_,
                                   atol=1e-8)

    @given(seed=st.integers(0, 1000), lam=st.floats(0.01, 1.0), alpha=unit)
    def test_objective_never_increases(self, seed, lam, alpha):
        X, y = _design(seed, p=4)
        trace = []
        elastic_net_fit(X, y, lam, alpha, trace=trace)
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_zero_penalty_recovers_ols(self):
        X, y = _design(9)
        np.testing.assert_allclose(elastic_net_fit(X, y, 0.0, 0.5, tol=1e-12).coefficients,
                                   ols_fit(X, y).coefficients, rtol=1e-7)

    def test_infinite_penalty_gives_intercept_only(self):
        X, y = _design(10)
        fit = elastic_net_fit(X, y, np.inf, 0.5)
        assert np.all(fit.coefficients == 0)
        assert fit.intercept == pytest.approx(y.mean())

    def test_lasso_sparsity(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(200, 6))
        y = 2 * X[:, 0] + rng.normal(scale=0.1, size=200)
        fit = elastic_net_fit(X, y, 0.5, 1.0)
        assert fit.coefficients[0] > 0
        assert np.all(fit.coefficients[1:] == 0)

    def test_convergence_error(self):
        X, y = _design(12, p=4)
        with pytest.raises(ConvergenceError):
            elastic_net_fit(X, y, 1e-4, 0.5, tol=1e-16, max_sweeps=2)

    def test_bad_arguments(self):
        X, y = _design(13)
        with pytest.raises(ArgumentError):
            elastic_net_fit(X, y, -1.0, 0.5)
        with pytest.raises(ArgumentError):
            elastic_net_fit(X, y, 1.0, 1.5)

    def test_tuning_returns_grid_point(self):
        X, y = _design(14, n=80)
        lam, alpha, fit = tune_elastic_net(X, y, grid_size=5, folds=4)
        assert lam in np.linspace(0, 1, 5) and alpha in np.linspace(0, 1, 5)
        assert fit.method == "elastic_net" and fit.extra["cv_mse"] > 0
        # Strong signal: the selected fit should keep the slopes clearly positive.
        assert np.all(fit.coefficients > 0.5)


class TestHypothesisTests:
    samples = hnp.arrays(float, st.integers(2, 40), elements=st.floats(-1e3, 1e3))

    @given(a=samples, b=samples)
    def test_welch_matches_scipy(self, a, b):
        res = welch_t_test(a, b)
        if res.degenerate:
            return
        ref = scipy.stats.ttest_ind(a, b, equal_var=False)
        assert res.statistic == pytest.approx(ref.statistic, rel=1e-8, abs=1e-10)
        assert res.p_value == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-12)

    @given(a=samples, b=samples)
    def test_welch_antisymmetric(self, a, b):
        ab, ba = welch_t_test(a, b), welch_t_test(b, a)
        if ab.degenerate:
            assert ba.degenerate
            return
        assert ab.statistic == pytest.approx(-ba.statistic)
        assert ab.p_value == pytest.approx(ba.p_value)

    def test_welch_constant_samples_degenerate(self):
        equal = welch_t_test([2.0, 2.0], [2.0, 2.0, 2.0])
        assert equal.degenerate and equal.p_value == 1.0
        apart = welch_t_test([1.0, 1.0], [2.0, 2.0, 2.0])
        assert apart.degenerate and apart.statistic == -np.inf and apart.p_value == 0.0

    def test_welch_singleton_uses_zero_variance(self):
        res = welch_t_test([5.0], [1.0, 2.0, 3.0])
        assert res.statistic == pytest.approx(3.0 / np.sqrt(1.0 / 3.0))

    def test_chi_square_gof_matches_scipy(self):
        obs = np.array([18, 22, 30, 30])
        exp = np.array([25.0, 25.0, 25.0, 25.0])
        res = chi_square_gof(obs, exp)
        ref = scipy.stats.chisquare(obs, exp)
        assert res.statistic == pytest.approx(ref.statistic)
        assert res.p_value == pytest.approx(ref.pvalue)

    def test_coefficient_t_test(self):
        sm = pytest.importorskip("statsmodels.api")
        X, y = _design(15)
        ref = sm.OLS(y, sm.add_constant(X)).fit()
        res = coefficient_t_test(ols_fit(X, y), 1, null_value=2.0)
        assert res.statistic == pytest.approx((ref.params[2] - 2.0) / ref.bse[2], rel=1e-8)
        assert res.degrees_of_freedom == ref.df_resid

    def test_result_serializes(self):
        d = welch_t_test([1.0, 2.0, 4.0], [0.0, 0.5, 0.2]).to_dict()
        assert set(d) >= {"statistic", "p_value"}


class TestRandomStreams:
    @given(seed=st.integers(0, 2**64 - 1), index=st.lists(st.integers(0, 1000), max_size=3))
    def test_substreams_are_reproducible(self, seed, index):
        a = RandomStream(seed).substream(*index).generator.random(4)
        b = RandomStream(seed).substream(*index).generator.random(4)
        np.testing.assert_array_equal(a, b)

    def test_substreams_differ(self):
        root = RandomStream(42)
        draws = {tuple(root.substream(i).generator.random(3)) for i in range(20)}
        assert len(draws) == 20

    def test_nested_index_is_path(self):
        root = RandomStream(1)
        a = root.substream(3).substream(5).generator.random(3)
        b = root.substream(3, 5).generator.random(3)
        np.testing.assert_array_equal(a, b)

    def test_algorithms(self):
        a = RandomStream(1, "philox").generator.random()
        b = RandomStream(1, "pcg64").generator.random()
        assert a != b
        with pytest.raises(ArgumentError):
            RandomStream(1, "mt19937")

    def test_as_stream(self):
        s = RandomStream(9)
        assert as_stream(s) is s
        assert as_stream(9).seed == 9
