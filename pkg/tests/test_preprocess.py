import math

import numpy as np
import pytest

from oracles import lowess_trend
from varshift.errors import DegenerateSampleError, InputError, ParameterError
from varshift.preprocess import (
    StepwiseMean,
    TimeSeries,
    ar1_coefficient,
    first_differences,
    lowess_detrend,
    monthly_anomalies,
    parse_time_label,
    prewhiten,
    remove_stepwise_mean,
    running_std,
)


def ar1_series(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=n + 200)
    x = np.empty_like(e)
    x[0] = e[0]
    for i in range(1, e.size):
        x[i] = phi * x[i - 1] + e[i]
    return x[200:]


def monthly_labels(start_year, n):
    return [f"{start_year + i // 12}-{i % 12 + 1:02d}" for i in range(n)]


class TestTimeSeries:
    def test_labels(self):
        assert parse_time_label("1950") == (1950, None)
        assert parse_time_label("1950-07") == (1950, 7)
        with pytest.raises(InputError):
            parse_time_label("1950-13")
        with pytest.raises(InputError):
            parse_time_label("July 1950")

    def test_monthly_period(self):
        ts = TimeSeries([1.0, 2.0], ("1950-11", "1950-12"))
        assert ts.period == 12 and ts.first_month == 11 and ts.label(1) == "1950-12"

    def test_invariants(self):
        with pytest.raises(InputError, match="increasing"):
            TimeSeries([1.0, 2.0], ("1951", "1950"))
        with pytest.raises(InputError, match="mix"):
            TimeSeries([1.0, 2.0], ("1950", "1950-02"))
        with pytest.raises(InputError):
            TimeSeries([1.0, 2.0], ("1950",))
        with pytest.raises(InputError):
            TimeSeries([1.0, 2.0], ("1950-01", "1950-02"), period=4)

    def test_unlabelled(self):
        ts = TimeSeries([3.0, 4.0])
        assert ts.label(0) == "1" and ts.first_month == 1 and len(ts) == 2


class TestLowess:
    def test_linear_input_has_zero_residuals(self):
        i = np.arange(60, dtype=float)
        for f in (0.1, 0.3, 1.0):
            trend, resid = lowess_detrend(2.5 - 0.7 * i, f)
            assert np.max(np.abs(resid)) < 1e-10

    def test_constant(self):
        trend, resid = lowess_detrend(np.full(30, 4.2), 0.2)
        assert np.allclose(trend, 4.2, atol=1e-12)

    def test_quadratic_matches_oracle(self):
        y = np.arange(100, dtype=float) ** 2
        trend, resid = lowess_detrend(y, 0.3)
        ref = lowess_trend(y, 0.3)
        assert np.max(np.abs(trend - ref)) < 1e-10
        assert np.max(np.abs(resid - (y - ref))) < 1e-10

    def test_noisy_matches_oracle(self):
        y = np.random.default_rng(1).normal(size=80).cumsum()
        assert np.max(np.abs(lowess_detrend(y, 0.1)[0] - lowess_trend(y, 0.1))) < 1e-10

    def test_robustness_iterations_resist_spike(self):
        y = np.sin(np.arange(100) / 10.0)
        y[50] += 20.0
        plain, _ = lowess_detrend(y, 0.2, iterations=0)
        robust, _ = lowess_detrend(y, 0.2, iterations=3)
        assert abs(robust[50] - math.sin(5.0)) < abs(plain[50] - math.sin(5.0))

    def test_window_errors(self):
        with pytest.raises(ParameterError):
            lowess_detrend(np.arange(10.0), 0.1)
        with pytest.raises(ParameterError):
            lowess_detrend(np.arange(3.0), 1.0)
        with pytest.raises(ParameterError):
            lowess_detrend(np.arange(50.0), 0.0)
        with pytest.raises(ParameterError):
            lowess_detrend(np.arange(50.0), 0.1, iterations=6)

    def test_keeps_labels(self):
        ts = TimeSeries(np.arange(20.0), tuple(str(1900 + i) for i in range(20)))
        trend, resid = lowess_detrend(ts, 0.5)
        assert resid.labels == ts.labels


class TestAR1:
    def test_geometric(self):
        assert ar1_coefficient(0.5 ** np.arange(20)) == pytest.approx(0.5, abs=1e-12)

    def test_alternating(self):
        assert ar1_coefficient((-1.0) ** np.arange(30)) == pytest.approx(-1.0, abs=1e-12)

    def test_white_noise(self):
        assert abs(ar1_coefficient(np.random.default_rng(0).normal(size=100_000))) < 0.01

    def test_errors(self):
        with pytest.raises(ParameterError):
            ar1_coefficient([1.0, 2.0])
        with pytest.raises(DegenerateSampleError):
            ar1_coefficient([3.0, 3.0, 3.0, 3.0])

    @pytest.mark.parametrize("phi", [0.3, 0.72, 0.9])
    def test_prewhitening_removes_lag1_correlation(self, phi):
        x = ar1_series(phi, 10_000, seed=int(phi * 100))
        est = ar1_coefficient(x)
        assert est == pytest.approx(phi, abs=0.03)
        assert abs(ar1_coefficient(prewhiten(x, est))) < 0.02


class TestPrewhitenAndDiff:
    def test_geometric_to_zero(self):
        assert np.allclose(prewhiten(0.5 ** np.arange(10), 0.5), 0.0, atol=1e-15)

    def test_phi_zero(self):
        x = np.array([4.0, 5.0, 6.0])
        assert list(prewhiten(x, 0.0)) == [5.0, 6.0]

    def test_hand_values(self):
        assert prewhiten([1.0, 2.0, 3.0], 0.72) == pytest.approx([1.28, 1.56])

    def test_differences(self):
        assert list(first_differences([1.0, 4.0, 9.0])) == [3.0, 5.0]
        assert np.all(first_differences(np.full(5, 2.0)) == 0.0)
        assert np.allclose(first_differences(1.0 + 0.25 * np.arange(9)), 0.25)

    def test_labels_follow_later_observation(self):
        ts = TimeSeries([1.0, 4.0, 9.0], ("2000", "2001", "2002"))
        d = first_differences(ts)
        assert d.labels == ("2001", "2002")
        assert prewhiten(ts, 0.5).labels == ("2001", "2002")

    def test_short(self):
        with pytest.raises(ParameterError):
            first_differences([1.0])
        with pytest.raises(ParameterError):
            prewhiten([1.0], 0.3)


class TestMonthlyAnomalies:
    def test_two_year_hand_case(self):
        x = np.arange(24, dtype=float)
        x[0], x[12] = 1.0, 3.0
        out = monthly_anomalies(x)
        assert out[0] == pytest.approx(-1 / math.sqrt(2))
        assert out[12] == pytest.approx(1 / math.sqrt(2))

    def test_standardized_per_month(self):
        x = np.random.default_rng(4).normal(size=120) * 3 + np.tile(np.arange(12.0), 10)
        out = monthly_anomalies(x)
        for m in range(12):
            vals = out[m::12]
            assert vals.mean() == pytest.approx(0.0, abs=1e-12)
            assert vals.var(ddof=1) == pytest.approx(1.0, rel=1e-12)

    def test_climatology_trips_guard(self):
        x = np.tile(np.arange(12.0), 3)
        with pytest.raises(DegenerateSampleError, match="January"):
            monthly_anomalies(x)

    def test_guard_names_the_month(self):
        x = np.random.default_rng(5).normal(size=36)
        x[4::12] = 1.0
        with pytest.raises(DegenerateSampleError, match="May"):
            monthly_anomalies(x)

    def test_first_month_from_labels(self):
        x = np.random.default_rng(6).normal(size=36)
        x[0::12] = 1.0
        # the constant positions are Marches when the series starts in March
        ts = TimeSeries(x, tuple(monthly_labels(1950, 38)[2:]))
        with pytest.raises(DegenerateSampleError, match="March"):
            monthly_anomalies(ts)

    def test_too_short(self):
        with pytest.raises(ParameterError):
            monthly_anomalies(np.arange(23.0))


class TestStepwiseMean:
    def test_single_segment(self):
        x = np.array([1.0, 2.0, 6.0])
        assert np.allclose(remove_stepwise_mean(x, []), x - 3.0)

    def test_hand_case(self):
        # change at the third observation (0-based 2)
        assert list(remove_stepwise_mean([1.0, 1.0, 5.0, 5.0], [2])) == [0.0, 0.0, 0.0, 0.0]

    def test_segment_sums_zero(self):
        x = np.random.default_rng(7).normal(size=90)
        r = remove_stepwise_mean(x, [20, 55])
        for a, b in [(0, 20), (20, 55), (55, 90)]:
            assert r[a:b].sum() == pytest.approx(0.0, abs=1e-12)

    def test_explicit_means(self):
        steps = StepwiseMean((2,), (1.0, 4.0))
        assert list(remove_stepwise_mean([1.0, 2.0, 4.0, 6.0], steps)) == [0.0, 1.0, 0.0, 2.0]

    def test_errors(self):
        with pytest.raises(ParameterError):
            remove_stepwise_mean([1.0, 2.0, 3.0], [2, 2])
        with pytest.raises(ParameterError):
            remove_stepwise_mean([1.0, 2.0, 3.0], [3])
        with pytest.raises(ParameterError):
            StepwiseMean((1,), (0.0,))


class TestRunningStd:
    def test_constant(self):
        out = running_std(np.full(20, 3.0), 5)
        assert np.all(np.isnan(out[:2])) and np.all(np.isnan(out[-2:]))
        assert np.all(out[2:-2] == 0.0)

    def test_full_window(self):
        x = np.random.default_rng(8).normal(size=13)
        out = running_std(x, 13)
        assert np.sum(~np.isnan(out)) == 1
        assert out[6] == pytest.approx(np.std(x, ddof=1))

    def test_alternating_window_13(self):
        x = (-1.0) ** np.arange(40)
        out = running_std(x, 13)
        mean = 1 / 13
        expected = math.sqrt((7 * (1 - mean) ** 2 + 6 * (1 + mean) ** 2) / 12)
        assert np.allclose(out[6:-6], expected)

    def test_errors(self):
        with pytest.raises(ParameterError):
            running_std(np.arange(20.0), 4)
        with pytest.raises(ParameterError):
            running_std(np.arange(5.0), 7)


def test_fig7_chain_is_bit_reproducible():
    rng = np.random.default_rng(9)
    x = rng.normal(size=240) + np.tile(np.arange(12.0), 20)

    def chain(v):
        anom = monthly_anomalies(v)
        _, resid = lowess_detrend(anom, 0.1)
        return prewhiten(resid, ar1_coefficient(resid))

    assert chain(x).tobytes() == chain(x.copy()).tobytes()
    assert chain(x).size == 239
