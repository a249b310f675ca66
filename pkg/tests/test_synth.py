import math
from datetime import date

import numpy as np
import pytest

from tokencast.features import align
from tokencast.market import log_returns
from tokencast.synth import SynthConfig, generate


class TestGenerate:
    def test_shapes_and_span(self):
        prices, daily = generate(SynthConfig(days=400, seed=7))
        assert len(prices) == 400
        assert len(daily) == 400
        assert prices.bars[0].date == daily[0].date == date(2023, 6, 15)
        assert prices.is_contiguous()

    def test_deterministic(self):
        a_prices, a_daily = generate(SynthConfig(days=50, seed=3))
        b_prices, b_daily = generate(SynthConfig(days=50, seed=3))
        assert a_prices.bars == b_prices.bars
        assert a_daily == b_daily

    def test_seed_matters(self):
        a, _ = generate(SynthConfig(days=50, seed=3))
        b, _ = generate(SynthConfig(days=50, seed=4))
        assert a.bars != b.bars

    def test_typical_price_tracks_integrated_returns(self):
        cfg = SynthConfig(days=120, seed=11, beta=0.4, noise_sd=0.01)
        prices, daily = generate(cfg)
        rng = np.random.default_rng(cfg.seed)
        scores = rng.uniform(-0.8, 0.8, cfg.days)
        rng_counts = rng.integers(5, 80, cfg.days)
        noise = rng.normal(0.0, cfg.noise_sd, cfg.days - 1)
        expected_r = cfg.beta * scores[:-1] + noise
        observed_r = [p.r for p in log_returns(prices)]
        assert np.max(np.abs(np.array(observed_r) - expected_r)) < 1e-9
        assert [d.score for d in daily] == [pytest.approx(s) for s in scores]

    def test_beta_zero_returns_are_noise(self):
        cfg = SynthConfig(days=300, seed=5, beta=0.0, noise_sd=0.02)
        prices, daily = generate(cfg)
        rs = np.array([p.r for p in log_returns(prices)])
        scores = np.array([d.score for d in daily][:-1])
        corr = np.corrcoef(scores, rs)[0, 1]
        assert abs(corr) < 0.15
        assert np.std(rs) == pytest.approx(0.02, rel=0.25)

    def test_aligns_cleanly(self):
        prices, daily = generate(SynthConfig(days=60, seed=9))
        rows, dropped = align(prices, daily)
        assert len(rows) == 60
        assert dropped == 0
        assert all(r.senti == d.score for r, d in zip(rows, daily))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(days=1)
        with pytest.raises(ValueError):
            SynthConfig(noise_sd=-0.1)
