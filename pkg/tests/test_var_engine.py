import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewmask.errors import InputError
from ewmask.gram_charlier import ShapePair
from ewmask.var_engine import (
    CfOptions,
    ForecastState,
    VaRQuery,
    aggregate_returns,
    cornish_fisher_quantile,
    filtered_historical_simulation,
    fhs_var_series,
    forecast_dates,
    forecast_var,
    historical_simulation,
    hs_var_series,
    normal_quantile,
    parametric_var,
    parametric_var_series,
    read_var_csv,
    rescale_moments,
    var_series_csv,
)

Z99 = 2.3263478740408408
Z95 = 1.6448536269514722


def _cf_by_hand(z, s, ex):
    return z * (1 + (s / 6) * (z * z - 1) + (ex / 24) * (z**3 - 3 * z))


class TestCornishFisher:
    @pytest.mark.parametrize("alpha, expected", [(0.01, 2.3263), (0.05, 1.6449), (0.5, 0.0)])
    def test_gaussian_nesting(self, alpha, expected):
        assert cornish_fisher_quantile(alpha, ShapePair(0.0, 3.0)) == pytest.approx(expected, abs=5e-5)
        assert cornish_fisher_quantile(alpha) == normal_quantile(alpha)

    def test_skewed_leptokurtic(self):
        q = cornish_fisher_quantile(0.01, ShapePair(-0.5, 4.0))
        assert q == pytest.approx(_cf_by_hand(Z99, -0.5, 1.0), rel=1e-12)
        assert q == pytest.approx(2.0150, abs=1e-4)

    def test_raw_kurtosis_option(self):
        q = cornish_fisher_quantile(0.01, ShapePair(0.0, 3.0), CfOptions(raw_kurtosis=True))
        assert q == pytest.approx(_cf_by_hand(Z99, 0.0, 3.0), rel=1e-12)
        assert q != pytest.approx(Z99, rel=1e-3)

    def test_full_option_adds_second_order_skew(self):
        base = cornish_fisher_quantile(0.01, ShapePair(0.8, 3.0))
        full = cornish_fisher_quantile(0.01, ShapePair(0.8, 3.0), CfOptions(full=True))
        assert full - base == pytest.approx(-(2 * Z99**3 - 5 * Z99) * 0.64 / 36, rel=1e-12)
        assert cornish_fisher_quantile(0.01, ShapePair(0.0, 5.0), CfOptions(full=True)) == \
            cornish_fisher_quantile(0.01, ShapePair(0.0, 5.0))

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 0.6, 1.0])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ValueError):
            cornish_fisher_quantile(alpha)

    def test_quantile_increases_with_skew(self):
        # the contracted form z{1 + (s/6)(z^2 - 1) + ...} has slope z(z^2 - 1)/6 > 0 in s
        qs = [cornish_fisher_quantile(0.01, ShapePair(s, 4.0)) for s in np.linspace(-1, 1, 41)]
        assert np.all(np.diff(qs) > 0)

    def test_level_ordering_can_fail_under_strong_negative_skew(self):
        q1 = cornish_fisher_quantile(0.01, ShapePair(-1.0, 3.0))
        q5 = cornish_fisher_quantile(0.05, ShapePair(-1.0, 3.0))
        assert q1 == pytest.approx(_cf_by_hand(Z99, -1.0, 0.0), rel=1e-12)
        assert q5 == pytest.approx(_cf_by_hand(Z95, -1.0, 0.0), rel=1e-12)
        assert q1 < q5

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(3.0, 10.0))
    def test_level_ordering_for_nonnegative_skew(self, s, k):
        assert cornish_fisher_quantile(0.01, ShapePair(s, k)) >= cornish_fisher_quantile(0.05, ShapePair(s, k))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-1, 1), st.floats(0.5, 10))
    def test_continuous_in_shape(self, s, k):
        a = cornish_fisher_quantile(0.01, ShapePair(s, k))
        b = cornish_fisher_quantile(0.01, ShapePair(s + 1e-9, k + 1e-9))
        assert abs(a - b) < 1e-7


class TestParametricVar:
    @pytest.mark.parametrize("mu, sigma, q, expected", [(0.0, 1.0, 2.3263, 2.3263), (0.05, 2.0, 2.3263, 4.6026)])
    def test_examples(self, mu, sigma, q, expected):
        assert parametric_var(mu, sigma, q) == pytest.approx(expected, rel=1e-12)

    def test_rejects_zero_sigma(self):
        with pytest.raises(ValueError):
            parametric_var(0.0, 0.0, 2.3263)


class TestHistorical:
    def test_first_order_statistic(self):
        w = np.zeros(100)
        w[:2] = [-10.0, -5.0]
        assert historical_simulation(w, 0.01) == 10.0

    def test_minimum_draw(self):
        w = np.random.default_rng(0).standard_normal(100)
        assert historical_simulation(w, 0.01) == -w.min()

    def test_second_order_statistic(self):
        w = np.concatenate([[-3.0, -2.0, -1.0], np.zeros(197)])
        assert historical_simulation(w, 0.01) == 2.0

    def test_order_statistic_rule(self):
        w = np.random.default_rng(1).standard_normal(777)
        k = math.ceil(0.05 * 777)
        assert historical_simulation(w, 0.05) == -np.sort(w)[k - 1]

    def test_window_too_short(self):
        with pytest.raises(InputError):
            historical_simulation(np.zeros(99), 0.01)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.integers(100, 600))
    def test_permutation_invariant(self, seed, n):
        rng = np.random.default_rng(seed)
        w = rng.standard_t(4, n)
        assert historical_simulation(rng.permutation(w), 0.01) == historical_simulation(w, 0.01)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31))
    def test_sign_flip_on_symmetric_window(self, seed):
        half = np.random.default_rng(seed).standard_normal(150)
        w = np.concatenate([half, -half])
        assert historical_simulation(-w, 0.01) == historical_simulation(w, 0.01)


class TestFilteredHistorical:
    def test_product(self):
        z = np.concatenate([[-2.5], np.zeros(99)])
        assert filtered_historical_simulation(z, 2.0, 0.01) == 5.0

    def test_unit_sigma_is_hs(self):
        z = np.random.default_rng(2).standard_normal(300)
        assert filtered_historical_simulation(z, 1.0, 0.01) == historical_simulation(z, 0.01)

    def test_degenerate_window_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="ewmask.var_engine"):
            v = filtered_historical_simulation(np.abs(np.random.default_rng(3).standard_normal(200)), 1.0, 0.01)
        assert v <= 0
        assert "degenerate" in caplog.text

    def test_rejects_sigma(self):
        with pytest.raises(ValueError):
            filtered_historical_simulation(np.zeros(200), 0.0, 0.01)


class TestRescale:
    def test_identity(self):
        assert rescale_moments(0.1, 1.3, -0.4, 5.0, 1) == (0.1, 1.3, -0.4, 5.0)

    @pytest.mark.parametrize("x, expected", [(4, (0.4, 2.6, 0.3, 3.0)), (10, (1.0, 1.3 * math.sqrt(10), 0.6 / math.sqrt(10), 3.3))])
    def test_examples(self, x, expected):
        kurt = 3.0 if x == 4 else 6.0
        assert rescale_moments(0.1, 1.3, 0.6, kurt, x) == pytest.approx(expected, rel=1e-14)

    def test_rejects(self):
        with pytest.raises(ValueError):
            rescale_moments(0, 1, 0, 3, 0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-2, 2), st.floats(0.5, 50))
    def test_limit_is_gaussian(self, s, k):
        _, _, sx, kx = rescale_moments(0.0, 1.0, s, k, 10**8)
        assert abs(sx) < 1e-3 and abs(kx - 3.0) < 1e-6


class TestForecastVar:
    def test_riskmetrics(self):
        v = forecast_var(ForecastState(0.0, 1.5), VaRQuery(0.01, 1, "RiskMetrics"))
        assert v == pytest.approx(3.4895, abs=5e-5)

    def test_gaussian_ewma_sk_matches_riskmetrics(self):
        a = forecast_var(ForecastState(0.02, 1.5, ShapePair(0.0, 3.0)), VaRQuery(0.01, 1, "EWMA-SK"))
        b = forecast_var(ForecastState(0.02, 1.5), VaRQuery(0.01, 1, "RiskMetrics"))
        assert a == b

    def test_shape_ignored_for_gaussian_models(self):
        st_ = ForecastState(0.0, 1.0, ShapePair(-0.8, 7.0))
        assert forecast_var(st_, VaRQuery(0.01, 1, "GARCH-N")) == pytest.approx(Z99, rel=1e-12)

    def test_ten_day_composition(self):
        mu, sigma, s, k = 0.03, 1.2, -0.4, 5.5
        got = forecast_var(ForecastState(mu, sigma, ShapePair(s, k)), VaRQuery(0.01, 10, "EWMA-SK"))
        kx = (k + 27.0) / 10.0
        sx = s / math.sqrt(10.0)
        want = _cf_by_hand(Z99, sx, kx - 3.0) * sigma * math.sqrt(10.0) - 10 * mu
        assert got == pytest.approx(want, rel=1e-12)

    def test_rejects_nonparametric(self):
        with pytest.raises(ValueError):
            forecast_var(ForecastState(0.0, 1.0), VaRQuery(0.01, 1, "HS"))

    @pytest.mark.parametrize("kwargs", [dict(confidence_alpha=0.0), dict(confidence_alpha=0.01, horizon_days=0),
                                        dict(confidence_alpha=0.01, model_tag="XYZ")])
    def test_query_validation(self, kwargs):
        with pytest.raises(ValueError):
            VaRQuery(**kwargs)


class TestWindows:
    def test_overlapping_count(self):
        assert len(forecast_dates(np.arange(500), 10)) == 491

    def test_non_overlapping(self):
        pos = forecast_dates(np.arange(500), 10, overlapping=False)
        assert len(pos) == 50 and pos[1] == 10

    def test_daily(self):
        assert len(forecast_dates(np.arange(500), 1)) == 500

    def test_aggregate(self):
        r = np.arange(1.0, 21.0)
        np.testing.assert_allclose(aggregate_returns(r, 10, np.array([0, 5, 10])),
                                   [r[:10].sum(), r[5:15].sum(), r[10:20].sum()])


class TestSeries:
    def test_parametric_series_uses_state_at_date(self):
        dates = np.arange(5).astype("datetime64[D]")
        v = np.array([1.0, 4.0, 9.0, 16.0, 25.0])
        s = parametric_var_series(dates, 0.0, v, np.zeros(5), np.full(5, 3.0), VaRQuery(0.01, 1, "RiskMetrics"))
        np.testing.assert_allclose(s.var_loss, Z99 * np.sqrt(v), rtol=1e-12)

    def test_hs_series_uses_strictly_earlier_returns(self):
        r = np.random.default_rng(4).standard_normal(400)
        dates = np.arange(400).astype("datetime64[D]")
        s = hs_var_series(r, dates, 300, VaRQuery(0.01, 1, "HS"))
        assert len(s) == 100 and s.dates[0] == dates[300]
        for j in (0, 50, 99):
            assert s.var_loss[j] == historical_simulation(r[: 300 + j], 0.01)
        rolled = hs_var_series(r, dates, 300, VaRQuery(0.01, 1, "HS"), window=250)
        assert rolled.var_loss[10] == historical_simulation(r[60:310], 0.01)

    def test_hs_multi_day_scaling(self):
        r = np.random.default_rng(5).standard_normal(400)
        dates = np.arange(400).astype("datetime64[D]")
        one = hs_var_series(r, dates, 300, VaRQuery(0.01, 1, "HS"))
        ten = hs_var_series(r, dates, 300, VaRQuery(0.01, 10, "HS"), positions=forecast_dates(dates[300:], 10))
        np.testing.assert_allclose(ten.var_loss, math.sqrt(10) * one.var_loss[:91], rtol=1e-14)

    def test_fhs_series(self):
        rng = np.random.default_rng(6)
        z = rng.standard_normal(400)
        v = rng.uniform(0.5, 2.0, 400)
        dates = np.arange(400).astype("datetime64[D]")
        s = fhs_var_series(z, v, dates, 300, VaRQuery(0.01, 1, "FHS"))
        assert s.var_loss[7] == pytest.approx(historical_simulation(z[:307], 0.01) * math.sqrt(v[307]), rel=1e-14)
        assert s.warnings == ()

    def test_csv_round_trip(self, tmp_path):
        dates = np.arange(3).astype("datetime64[D]")
        s = parametric_var_series(dates, 0.0, np.array([1.0, 2.0, 3.0]), np.zeros(3), np.full(3, 3.0),
                                  VaRQuery(0.01, 1, "GARCH-N"))
        p = tmp_path / "v.csv"
        p.write_text("# config_hash: abc\n" + var_series_csv([s]))
        back = read_var_csv(p)
        d, v = back[("GARCH-N", 0.01, 1)]
        assert d.tolist() == dates.tolist() and v.tolist() == s.var_loss.tolist()
        json.dumps(s.to_dict())

    def test_csv_bad_header(self, tmp_path):
        p = tmp_path / "v.csv"
        p.write_text("a,b\n")
        with pytest.raises(InputError):
            read_var_csv(p)
