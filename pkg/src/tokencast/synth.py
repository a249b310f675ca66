"""Deterministic synthetic dataset generator for end-to-end validation.

Daily sentiment scores are drawn independently; the log return realized
over day t -> t+1 is beta * S_t + Gaussian noise, so sentiment on the last
window day carries real signal (beta > 0) or none at all (beta = 0).
Prices are integrated from the returns and emitted as OHLCV bars whose
high/low jitter cancels in the typical price.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .market import OhlcvBar, PriceSeries
from .sentiment import DailySentiment, daily_sentiment


@dataclass(frozen=True)
class SynthConfig:
    days: int = 400
    seed: int = 7
    beta: float = 0.5
    noise_sd: float = 0.02
    start: date = date(2023, 6, 15)
    base_price: float = 0.45
    token_supply: float = 1.9e9

    def __post_init__(self):
        if self.days < 2:
            raise ValueError("need at least 2 days")
        if self.noise_sd < 0:
            raise ValueError("noise sd must be >= 0")
        if self.base_price <= 0:
            raise ValueError("base price must be > 0")


def generate(cfg: SynthConfig) -> tuple[PriceSeries, list[DailySentiment]]:
    """Same seed and config always produce identical series."""
    rng = np.random.default_rng(cfg.seed)
    days = cfg.days

    scores = rng.uniform(-0.8, 0.8, days)
    counts = rng.integers(5, 80, days)
    noise = rng.normal(0.0, cfg.noise_sd, days - 1)
    jitter_hi = rng.uniform(0.004, 0.008, days)
    jitter_lo = rng.uniform(0.004, 0.008, days)
    open_frac = rng.uniform(0.0, 1.0, days)
    volume = rng.uniform(1e6, 5e7, days)

    returns = cfg.beta * scores[:-1] + noise
    tau = np.empty(days)
    tau[0] = cfg.base_price
    tau[1:] = cfg.base_price * np.exp(np.cumsum(returns))

    bars = []
    for t in range(days):
        # high/low factors within a 2x band keep close inside [low, high]
        # and make (high + low + close) / 3 equal tau up to rounding
        high = tau[t] * (1.0 + jitter_hi[t])
        low = tau[t] * (1.0 - jitter_lo[t])
        close = tau[t] * (1.0 + jitter_lo[t] - jitter_hi[t])
        opn = low + open_frac[t] * (high - low)
        bars.append(
            OhlcvBar(
                date=cfg.start + timedelta(days=t),
                open=float(opn),
                high=float(high),
                low=float(low),
                close=float(close),
                volume=float(volume[t]),
                market_cap=float(tau[t] * cfg.token_supply),
            )
        )

    daily = [
        daily_sentiment(cfg.start + timedelta(days=t), float(scores[t]), int(counts[t]))
        for t in range(days)
    ]
    return PriceSeries.from_bars(bars), daily
