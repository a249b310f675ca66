import io
from datetime import date, timedelta

import numpy as np
import pytest

from tokencast.errors import DataContractError
from tokencast.features import (
    BASELINE_FEATURES,
    FEATURE_FIELDS,
    MULTIMODAL_FEATURES,
    DegenerateSplit,
    EmptyIntersection,
    FeatureRow,
    LookaheadViolation,
    Sample,
    TooFewRows,
    WindowTooLong,
    align,
    audit_samples,
    chronological_split,
    fit_scaler,
    make_samples,
    read_scaler,
    resolve_features,
    rows_to_matrix,
    write_feature_table,
    write_scaler,
)
from tokencast.market import OhlcvBar, PriceSeries, log_returns
from tokencast.sentiment import daily_sentiment

START = date(2023, 6, 15)


def price_series(n, start=START, seed=5):
    rng = np.random.default_rng(seed)
    bars = []
    tau = 0.45
    for k in range(n):
        tau *= float(np.exp(rng.normal(0, 0.03)))
        hi, lo = tau * 1.04, tau * 0.96
        bars.append(
            OhlcvBar(start + timedelta(days=k), tau, hi, lo, tau, float(rng.uniform(1e5, 1e6)), tau * 1.9e9)
        )
    return PriceSeries.from_bars(bars)


def sentiment_days(n, start=START, seed=6):
    rng = np.random.default_rng(seed)
    return [
        daily_sentiment(start + timedelta(days=k), float(rng.uniform(-0.8, 0.8)), int(rng.integers(1, 40)))
        for k in range(n)
    ]


def feature_rows(n, seed=7):
    prices = price_series(n, seed=seed)
    rows, _ = align(prices, sentiment_days(n, seed=seed + 1))
    return prices, rows


class TestAlign:
    def test_equal_spans(self):
        prices = price_series(366)
        rows, dropped = align(prices, sentiment_days(366))
        assert len(rows) == 366
        assert dropped == 0

    def test_no_sentiment_fills_zero(self):
        rows, dropped = align(price_series(10), [])
        assert len(rows) == 10
        assert all(r.senti == 0.0 for r in rows)
        assert dropped == 0

    def test_excess_sentiment_dropped_with_count(self):
        rows, dropped = align(price_series(10), sentiment_days(13))
        assert len(rows) == 10
        assert dropped == 3

    def test_disjoint_spans_rejected(self):
        far = sentiment_days(5, start=START + timedelta(days=100))
        with pytest.raises(EmptyIntersection):
            align(price_series(10), far)

    def test_gap_in_prices_rejected(self):
        bars = list(price_series(5).bars)
        del bars[2]
        gappy = PriceSeries.from_bars(bars)
        with pytest.raises(DataContractError):
            align(gappy, [])

    def test_partial_sentiment_fills_missing_days(self):
        senti = sentiment_days(4)  # covers only the first 4 of 8 days
        rows, _ = align(price_series(8), senti)
        assert all(r.senti == senti[k].score for k, r in enumerate(rows[:4]))
        assert all(r.senti == 0.0 for r in rows[4:])


class TestScaler:
    def rows_with_tau(self, taus):
        return [FeatureRow(START + timedelta(days=k), t, 10.0, 100.0, 0.1 * k) for k, t in enumerate(taus)]

    def test_minmax_direct(self):
        scaler = fit_scaler(self.rows_with_tau([1.0, 3.0]), "minmax")
        assert scaler.offset[0] == 1.0
        assert scaler.scale[0] == 2.0
        out = scaler.transform(np.array([[2.0, 10.0, 100.0, 0.0]]))
        assert out[0, 0] == pytest.approx(0.5, abs=0)

    def test_constant_feature_maps_to_zero(self):
        scaler = fit_scaler(self.rows_with_tau([2.0, 2.0, 2.0]), "minmax")
        assert scaler.constant[0] and scaler.constant[1] and scaler.constant[2]
        out = scaler.transform(np.array([[5.0, 10.0, 100.0, 0.1]]))
        assert out[0, 0] == 0.0

    def test_zscore_direct(self):
        scaler = fit_scaler(self.rows_with_tau([0.0, 2.0]), "zscore")
        assert scaler.offset[0] == 1.0
        assert scaler.scale[0] == 1.0
        out = scaler.transform(np.array([[0.0, 10.0, 100.0, 0.0]]))
        assert out[0, 0] == pytest.approx(-1.0, abs=0)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            fit_scaler(self.rows_with_tau([1.0]), "minmax")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            fit_scaler(self.rows_with_tau([1.0, 2.0]), "robust")

    def test_inverse_roundtrip(self):
        _, rows = feature_rows(60)
        for mode in ("minmax", "zscore"):
            scaler = fit_scaler(rows, mode)
            m = rows_to_matrix(rows)
            back = scaler.inverse_transform(scaler.transform(m))
            assert np.max(np.abs(back - m) / np.maximum(1.0, np.abs(m))) < 1e-10

    def test_transform_is_pure(self):
        _, rows = feature_rows(20)
        scaler = fit_scaler(rows[:10], "minmax")
        before = (scaler.offset.copy(), scaler.scale.copy())
        scaler.transform(rows_to_matrix(rows))
        assert np.array_equal(scaler.offset, before[0])
        assert np.array_equal(scaler.scale, before[1])

    def test_sidecar_roundtrip(self):
        _, rows = feature_rows(30)
        scaler = fit_scaler(rows, "zscore")
        buf = io.StringIO()
        write_scaler(scaler, buf)
        again = read_scaler(io.StringIO(buf.getvalue()))
        assert again.mode == scaler.mode
        assert np.array_equal(again.offset, scaler.offset)
        assert np.array_equal(again.scale, scaler.scale)
        assert np.array_equal(again.constant, scaler.constant)


class TestMakeSamples:
    def make(self, n=366, lookback=14, variant="multimodal"):
        prices, rows = feature_rows(n)
        returns = log_returns(prices)
        scaler = fit_scaler(rows, "minmax")
        return rows, returns, make_samples(rows, returns, lookback, variant, scaler), scaler

    def test_sample_count(self):
        _, returns, samples, _ = self.make(366, 14)
        assert len(returns) == 365
        assert len(samples) == 365 - 14 + 1 == 352

    def test_minimal_window_baseline(self):
        _, _, samples, _ = self.make(10, 1, "baseline")
        assert samples[0].window.shape == (1, 1)

    def test_no_lookahead_by_construction(self):
        rows, returns, samples, _ = self.make(40, 7)
        for k, s in enumerate(samples):
            assert rows[k + 6].date < s.date
            assert s.date == rows[k + 7].date

    def test_audit_passes(self):
        rows, returns, samples, scaler = self.make(60, 5)
        audit_samples(samples, rows, returns, 5, "multimodal", scaler)

    def test_audit_catches_tampered_window(self):
        rows, returns, samples, scaler = self.make(60, 5)
        samples[3].window[0, 0] += 1.0
        with pytest.raises(DataContractError):
            audit_samples(samples, rows, returns, 5, "multimodal", scaler)

    def test_audit_catches_lookahead_date(self):
        rows, returns, samples, scaler = self.make(60, 5)
        bad = Sample(samples[0].window, samples[0].target, rows[0].date)
        with pytest.raises(LookaheadViolation):
            audit_samples([bad], rows, returns, 5, "multimodal", scaler)

    def test_window_too_long(self):
        prices, rows = feature_rows(10)
        returns = log_returns(prices)
        scaler = fit_scaler(rows, "minmax")
        with pytest.raises(WindowTooLong):
            make_samples(rows, returns, 10, "multimodal", scaler)

    def test_misaligned_dates_rejected(self):
        prices, rows = feature_rows(10)
        returns = log_returns(prices)[:-1]
        scaler = fit_scaler(rows, "minmax")
        with pytest.raises(DataContractError):
            make_samples(rows, returns, 3, "multimodal", scaler)

    def test_variants_share_targets(self):
        prices, rows = feature_rows(50)
        returns = log_returns(prices)
        scaler = fit_scaler(rows, "minmax")
        base = make_samples(rows, returns, 6, "baseline", scaler)
        multi = make_samples(rows, returns, 6, "multimodal", scaler)
        assert [s.target for s in base] == [s.target for s in multi]
        assert [s.date for s in base] == [s.date for s in multi]
        assert base[0].window.shape == (6, 1)
        assert multi[0].window.shape == (6, 4)

    def test_feature_subset_variant(self):
        prices, rows = feature_rows(30)
        returns = log_returns(prices)
        scaler = fit_scaler(rows, "minmax")
        samples = make_samples(rows, returns, 3, ("tau", "vol", "senti"), scaler)
        assert samples[0].window.shape == (3, 3)

    def test_resolve_features(self):
        assert resolve_features("baseline") == BASELINE_FEATURES
        assert resolve_features("multimodal") == MULTIMODAL_FEATURES
        assert resolve_features(("tau", "senti")) == ("tau", "senti")
        with pytest.raises(ValueError):
            resolve_features("other")
        with pytest.raises(ValueError):
            resolve_features(("tau", "volume"))


class TestSplit:
    def dummy_samples(self, n):
        w = np.zeros((2, 1))
        return [Sample(w, 0.0, START + timedelta(days=k)) for k in range(n)]

    def test_floor_boundary(self):
        train, test = chronological_split(self.dummy_samples(352), 0.8)
        assert (len(train), len(test)) == (281, 71)

    def test_two_samples(self):
        train, test = chronological_split(self.dummy_samples(2), 0.5)
        assert (len(train), len(test)) == (1, 1)

    def test_degenerate(self):
        with pytest.raises(DegenerateSplit):
            chronological_split(self.dummy_samples(1), 0.5)

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            chronological_split(self.dummy_samples(10), 1.0)

    def test_time_order_preserved(self):
        train, test = chronological_split(self.dummy_samples(10), 0.7)
        assert max(s.date for s in train) < min(s.date for s in test)


class TestFeatureTable:
    def test_export_header_and_rows(self):
        _, rows = feature_rows(5)
        buf = io.StringIO()
        write_feature_table(rows, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "date," + ",".join(FEATURE_FIELDS)
        assert len(lines) == 6
