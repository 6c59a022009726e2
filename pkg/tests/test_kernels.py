import math

import numpy as np
import pytest
from scipy import stats

from oracles import incomplete_beta_series, two_pass
from varshift.errors import DegenerateSampleError, NumericalError, ParameterError
from varshift.kernels import (
    GaussianStream,
    f_quantile,
    f_tail_probability,
    huber_weight,
    huber_weights,
    mad_about_zero,
    regularized_incomplete_beta,
    two_pass_robust_variance,
    two_tailed_f_pvalue,
    variance_ratio_pvalue,
    weighted_variance,
)


class TestIncompleteBeta:
    def test_uniform(self):
        assert regularized_incomplete_beta(1, 1, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_endpoints(self):
        assert regularized_incomplete_beta(2.5, 4, 0.0) == 0.0
        assert regularized_incomplete_beta(2.5, 4, 1.0) == 1.0

    def test_integer_params_match_series(self):
        assert regularized_incomplete_beta(3, 2, 0.4) == pytest.approx(incomplete_beta_series(3, 2, 0.4), abs=1e-14)
        for a, b, x in [(1, 7, 0.2), (5, 5, 0.5), (12, 3, 0.9), (20, 30, 0.41), (2, 40, 0.01)]:
            assert regularized_incomplete_beta(a, b, x) == pytest.approx(incomplete_beta_series(a, b, x), rel=1e-12, abs=1e-15)

    def test_reflection(self):
        for a, b, x in [(0.5, 3.0, 0.3), (14.5, 2.0, 0.8), (7.0, 7.0, 0.51)]:
            lhs = regularized_incomplete_beta(a, b, x)
            assert lhs == pytest.approx(1 - regularized_incomplete_beta(b, a, 1 - x), abs=1e-14)

    def test_monotone(self):
        xs = np.linspace(0, 1, 101)
        vals = [regularized_incomplete_beta(3.5, 9.0, x) for x in xs]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("a,b,x", [(0, 1, 0.5), (1, -1, 0.5), (1, 1, 1.5), (1, 1, -0.1)])
    def test_domain(self, a, b, x):
        with pytest.raises(ParameterError):
            regularized_incomplete_beta(a, b, x)


class TestFDistribution:
    def test_median_equal_df(self):
        for v in (1, 4, 29, 200):
            assert f_tail_probability(1.0, v, v) == pytest.approx(0.5, abs=1e-12)

    def test_tail_against_scipy(self):
        for f, v1, v2 in [(0.3, 3, 7), (2.1, 29, 29), (5.0, 10, 54), (1.7, 150, 12)]:
            assert f_tail_probability(f, v1, v2) == pytest.approx(stats.f.sf(f, v1, v2), rel=1e-11)

    def test_tail_decreasing(self):
        vals = [f_tail_probability(f, 8, 12) for f in np.linspace(0.1, 6, 60)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_quantile_examples(self):
        assert f_quantile(0.5, 9, 9) == pytest.approx(1.0, abs=1e-12)
        assert f_quantile(0.025, 29, 29) == pytest.approx(2.10, abs=0.005)
        assert f_quantile(0.05, 10, 10) == pytest.approx(2.98, abs=0.005)
        assert f_quantile(0.025, 29, 29) == pytest.approx(stats.f.isf(0.025, 29, 29), rel=1e-10)

    def test_round_trip_grid(self):
        tails = [0.005, 0.01, 0.025, 0.05, 0.1, 0.15, 0.2, 0.25]
        dfs = [4, 7, 10, 19, 24, 29, 39, 60, 100, 200]
        worst = 0.0
        for q in tails:
            for v1 in dfs:
                for v2 in dfs:
                    worst = max(worst, abs(f_tail_probability(f_quantile(q, v1, v2), v1, v2) - q))
        assert worst < 1e-8

    def test_reciprocal_symmetry(self):
        for v in (4, 19, 29, 99):
            for q in (0.01, 0.05, 0.25):
                assert f_quantile(q, v, v) * f_quantile(1 - q, v, v) == pytest.approx(1.0, abs=1e-6)

    def test_quantile_decreasing_in_tail(self):
        vals = [f_quantile(q, 24, 24) for q in (0.01, 0.025, 0.05, 0.1, 0.2)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_errors(self):
        with pytest.raises(ParameterError):
            f_tail_probability(0.0, 3, 3)
        with pytest.raises(ParameterError):
            f_tail_probability(1.0, 0, 3)
        with pytest.raises(ParameterError):
            f_quantile(1.0, 3, 3)

    def test_non_convergence_reports_diagnostics(self, monkeypatch):
        import varshift.kernels as k

        monkeypatch.setattr(k, "_QUANTILE_MAXIT", 2)
        with pytest.raises(NumericalError) as info:
            k.f_quantile(0.0123, 17, 23)
        assert info.value.diagnostics["iterations"] == 2
        assert "bracket" in info.value.diagnostics

    def test_two_tailed(self):
        assert two_tailed_f_pvalue(1.0, 12, 12) == pytest.approx(1.0)
        p = two_tailed_f_pvalue(2.5, 20, 30)
        assert p == pytest.approx(2 * stats.f.sf(2.5, 20, 30), rel=1e-10)
        assert two_tailed_f_pvalue(1 / 2.5, 30, 20) == pytest.approx(p, rel=1e-10)

    def test_variance_ratio_pvalue_uses_lengths_minus_one(self):
        p = variance_ratio_pvalue(2.71, 11, 0.91, 55)
        assert p == pytest.approx(2 * stats.f.sf(2.71 / 0.91, 10, 54), rel=1e-10)
        with pytest.raises(ParameterError):
            variance_ratio_pvalue(1.0, 1, 1.0, 5)
        with pytest.raises(DegenerateSampleError):
            variance_ratio_pvalue(0.0, 5, 1.0, 5)


class TestRobustScale:
    def test_mad(self):
        assert mad_about_zero([1, -1, 1, -1]) == 1
        assert mad_about_zero([0, 0, 0]) == 0
        assert mad_about_zero([1, 2, 3, 100]) == 2.5
        with pytest.raises(ParameterError):
            mad_about_zero([])

    def test_huber_weight(self):
        assert huber_weight(1.5, 1.0, 2.0) == 1.0
        assert huber_weight(6.0, 1.0, 2.0) == pytest.approx(1 / 3)
        assert huber_weight(-6.0, 1.0, 2.0) == pytest.approx(1 / 3)
        assert huber_weight(0.0, 0.0, 2.0) == 1.0
        assert huber_weight(0.5, 0.0, 2.0) == 0.0
        with pytest.raises(ParameterError):
            huber_weight(1.0, 1.0, 0.0)

    def test_huber_weight_monotone(self):
        xs = np.linspace(0, 10, 41)
        w = [huber_weight(x, 1.3, 2.0) for x in xs]
        assert all(b <= a for a, b in zip(w, w[1:]))
        assert huber_weight(5, 1.0, 2.0) <= huber_weight(5, 1.5, 2.0) <= huber_weight(5, 1.5, 3.0)

    def test_vectorised_matches_scalar(self):
        x = np.array([0.0, 0.3, -2.2, 7.0, -9.5])
        assert np.allclose(huber_weights(x, 1.1, 2.0), [huber_weight(v, 1.1, 2.0) for v in x])

    def test_weighted_variance_hand_cases(self):
        assert weighted_variance([1, -1, 1, -1], [1, 1, 1, 1]) == 4 / 3
        assert weighted_variance([2, -2], [0.5, 0.5]) == 8.0
        with pytest.raises(DegenerateSampleError):
            weighted_variance([3.0], [1.0])

    def test_weighted_variance_unit_weights(self):
        x = np.random.default_rng(0).normal(size=37)
        assert weighted_variance(x, np.ones_like(x)) == pytest.approx(float(np.sum(x * x) / 36), rel=1e-14)

    def test_weighted_variance_rejects_bad_weights(self):
        with pytest.raises(ParameterError):
            weighted_variance([1, 2], [1.2, 0.5])
        with pytest.raises(ParameterError):
            weighted_variance([1, 2], [1.0])

    def test_two_pass_alternating(self):
        var, w = two_pass_robust_variance([1, -1, 1, -1], 2.0)
        assert var == pytest.approx(4 / 3)
        assert np.all(w == 1)

    def test_two_pass_outlier(self):
        x = [1, -1, 1, -1, 6]
        var, w = two_pass_robust_variance(x, 2.0)
        assert w[-1] < 1
        assert var < 10.0
        ref_var, ref_w = two_pass(x, 2.0)
        assert var == pytest.approx(ref_var, rel=1e-14)
        assert np.allclose(w, ref_w)

    def test_two_pass_all_zero(self):
        var, w = two_pass_robust_variance([0.0] * 6, 2.0)
        assert var == 0.0
        assert np.all(w == 1)

    def test_two_pass_permutation_invariant(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=40)
        x[5] = 9.0
        v1, _ = two_pass_robust_variance(x, 2.0)
        v2, _ = two_pass_robust_variance(rng.permutation(x), 2.0)
        assert v1 == pytest.approx(v2, rel=1e-13)


class TestGaussianStream:
    def test_zero_variance(self):
        assert np.all(GaussianStream(1, mean=2.5, variance=0.0).draw(50) == 2.5)

    def test_determinism(self):
        a = GaussianStream(42).draw(1000)
        b = GaussianStream(42).draw(1000)
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, GaussianStream(43).draw(1000))

    def test_moments(self):
        z = GaussianStream(7).draw(1_000_000)
        assert 0.99 <= z.var() <= 1.01
        assert abs(z.mean()) < 0.01

    def test_iterator(self):
        s = GaussianStream(5, mean=1.0, variance=4.0)
        first = [next(iter(s)) for _ in range(1)]
        assert len(first) == 1 and math.isfinite(first[0])

    def test_negative_variance(self):
        with pytest.raises(ParameterError):
            GaussianStream(1, variance=-1.0)
