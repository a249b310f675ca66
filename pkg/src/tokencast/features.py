"""Date-aligned feature rows, normalization and supervised windowing.

Feature order is fixed everywhere as (tau, vol, mcap, senti); the baseline
model variant restricts windows to tau only. Targets are raw log returns,
never normalized, so error magnitudes stay comparable across scaler modes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import DataContractError
from .market import PriceSeries, ReturnPoint
from .sentiment import DailySentiment

FEATURE_FIELDS = ("tau", "vol", "mcap", "senti")
BASELINE_FEATURES = ("tau",)
MULTIMODAL_FEATURES = FEATURE_FIELDS


class EmptyIntersection(DataContractError):
    pass


class TooFewRows(DataContractError):
    pass


class WindowTooLong(DataContractError):
    pass


class LookaheadViolation(AssertionError):
    """A sample window reaches into or past its target's realization day."""


class DegenerateSplit(DataContractError):
    pass


@dataclass(frozen=True, slots=True)
class FeatureRow:
    date: date
    tau: float
    vol: float
    mcap: float
    senti: float

    def __post_init__(self):
        for name in FEATURE_FIELDS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def align(
    prices: PriceSeries,
    daily: Sequence[DailySentiment],
) -> tuple[list[FeatureRow], int]:
    """Join price days with daily sentiment into one row per price day.

    Price days without a sentiment entry get score 0 (the neutral fill used
    throughout); sentiment days outside the price span are dropped and
    counted. Returns (rows, dropped_count).
    """
    if len(prices) == 0:
        raise EmptyIntersection("price series is empty")
    missing = prices.missing_days()
    if missing:
        raise DataContractError(
            f"price series has {len(missing)} missing day(s), first {missing[0].isoformat()}"
        )
    by_day: dict[date, float] = {}
    for d in daily:
        if d.date in by_day:
            raise DataContractError(f"duplicate sentiment day {d.date.isoformat()}")
        by_day[d.date] = d.score

    first, last = prices.bars[0].date, prices.bars[-1].date
    dropped = sum(1 for d in daily if d.date < first or d.date > last)
    if daily and dropped == len(daily):
        raise EmptyIntersection("no sentiment day overlaps the price span")

    rows = [
        FeatureRow(bar.date, tau, bar.volume, bar.market_cap, by_day.get(bar.date, 0.0))
        for bar, tau in zip(prices.bars, prices.typical)
    ]
    return rows, dropped


def rows_to_matrix(rows: Sequence[FeatureRow]) -> np.ndarray:
    """(n, 4) float64 matrix in FEATURE_FIELDS order."""
    return np.array([[r.tau, r.vol, r.mcap, r.senti] for r in rows], dtype=np.float64)


@dataclass(frozen=True)
class Scaler:
    """Per-feature affine normalizer fitted on training rows only.

    transform(x) = (x - offset) / scale; constant features (zero scale) map
    to 0 and inverse-transform back to their fitted offset.
    """

    mode: str
    offset: np.ndarray
    scale: np.ndarray
    constant: np.ndarray
    features: tuple[str, ...] = FEATURE_FIELDS

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        safe = np.where(self.constant, 1.0, self.scale)
        out = (matrix - self.offset) / safe
        out[:, self.constant] = 0.0
        return out

    def inverse_transform(self, matrix: np.ndarray) -> np.ndarray:
        out = matrix * np.where(self.constant, 0.0, self.scale) + self.offset
        return out


def fit_scaler(rows: Sequence[FeatureRow], mode: str = "minmax") -> Scaler:
    """Fit min-max or z-score statistics over the given (training) rows."""
    if mode not in ("minmax", "zscore"):
        raise ValueError(f"unknown scaler mode {mode!r}")
    if len(rows) < 2:
        raise TooFewRows(f"need at least 2 rows to fit a scaler, got {len(rows)}")
    matrix = rows_to_matrix(rows)
    if mode == "minmax":
        lo = matrix.min(axis=0)
        hi = matrix.max(axis=0)
        offset, scale = lo, hi - lo
    else:
        offset = matrix.mean(axis=0)
        scale = matrix.std(axis=0)
    constant = scale == 0.0
    return Scaler(mode=mode, offset=offset, scale=scale, constant=constant)


@dataclass(frozen=True, eq=False)
class Sample:
    """One supervised pair: an L x d window of normalized features and the
    raw log return realized on `date` (the day after the window ends)."""

    window: np.ndarray
    target: float
    date: date


def resolve_features(variant: str | Sequence[str]) -> tuple[str, ...]:
    if isinstance(variant, str):
        if variant == "baseline":
            return BASELINE_FEATURES
        if variant == "multimodal":
            return MULTIMODAL_FEATURES
        raise ValueError(f"unknown variant {variant!r}")
    selected = tuple(variant)
    if not selected:
        raise ValueError("feature subset must be non-empty")
    for name in selected:
        if name not in FEATURE_FIELDS:
            raise ValueError(f"unknown feature {name!r}")
    return selected


def make_samples(
    rows: Sequence[FeatureRow],
    returns: Sequence[ReturnPoint],
    lookback: int,
    variant: str | Sequence[str],
    scaler: Scaler,
) -> list[Sample]:
    """Window normalized rows into (sequence -> next-day return) samples.

    Sample k covers row days [k, k+L-1] and targets the return stamped on
    day k+L-1, i.e. realized over k+L-1 -> k+L; its date is the realization
    day, so every window value strictly predates it.
    """
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    if len(returns) != len(rows) - 1:
        raise DataContractError(
            f"expected {len(rows) - 1} returns for {len(rows)} rows, got {len(returns)}"
        )
    for row, point in zip(rows, returns):
        if row.date != point.date:
            raise DataContractError(
                f"row/return date mismatch: {row.date.isoformat()} vs {point.date.isoformat()}"
            )
    if lookback > len(returns):
        raise WindowTooLong(f"lookback {lookback} exceeds {len(returns)} available returns")

    fields = resolve_features(variant)
    cols = [FEATURE_FIELDS.index(f) for f in fields]
    matrix = scaler.transform(rows_to_matrix(rows))[:, cols]

    samples = []
    for k in range(len(returns) - lookback + 1):
        window = matrix[k : k + lookback].copy()
        target = returns[k + lookback - 1].r
        samples.append(Sample(window=window, target=target, date=rows[k + lookback].date))
    return samples


def audit_samples(
    samples: Sequence[Sample],
    rows: Sequence[FeatureRow],
    returns: Sequence[ReturnPoint],
    lookback: int,
    variant: str | Sequence[str],
    scaler: Scaler,
) -> None:
    """Independent recheck of the no-lookahead contract.

    Rebuilds every window/target from scratch and verifies that windows
    match bit for bit and that each window's last day strictly precedes the
    sample's realization day.
    """
    fields = resolve_features(variant)
    cols = [FEATURE_FIELDS.index(f) for f in fields]
    matrix = scaler.transform(rows_to_matrix(rows))[:, cols]
    for k, sample in enumerate(samples):
        expected = matrix[k : k + lookback]
        if sample.window.shape != expected.shape or not np.array_equal(sample.window, expected):
            raise DataContractError(f"sample {k}: window does not match source rows")
        if sample.target != returns[k + lookback - 1].r:
            raise DataContractError(f"sample {k}: target does not match stamped return")
        window_last = rows[k + lookback - 1].date
        if window_last >= sample.date:
            raise LookaheadViolation(
                f"sample {k}: window reaches {window_last.isoformat()} but target realizes {sample.date.isoformat()}"
            )


def chronological_split(
    samples: Sequence[Sample],
    train_frac: float,
) -> tuple[list[Sample], list[Sample]]:
    """Time-ordered split at floor(train_frac * count)."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac!r}")
    boundary = math.floor(train_frac * len(samples))
    if boundary == 0 or boundary == len(samples):
        raise DegenerateSplit(
            f"split of {len(samples)} samples at {train_frac} leaves one side empty"
        )
    return list(samples[:boundary]), list(samples[boundary:])


def write_feature_table(rows: Sequence[FeatureRow], dest: str | Path | IO[str]) -> None:
    own = isinstance(dest, (str, Path))
    out = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["date"] + list(FEATURE_FIELDS))
        for r in rows:
            writer.writerow([r.date.isoformat()] + [repr(getattr(r, f)) for f in FEATURE_FIELDS])
    finally:
        if own:
            out.close()


def write_scaler(scaler: Scaler, dest: str | Path | IO[str]) -> None:
    """Sidecar file recording mode and per-feature statistics."""
    payload = {
        "mode": scaler.mode,
        "features": list(scaler.features),
        "offset": [float(v) for v in scaler.offset],
        "scale": [float(v) for v in scaler.scale],
        "constant": [bool(v) for v in scaler.constant],
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8")
    else:
        dest.write(text)


def read_scaler(source: str | Path | IO[str]) -> Scaler:
    if isinstance(source, (str, Path)):
        payload = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        payload = json.load(source)
    return Scaler(
        mode=payload["mode"],
        offset=np.array(payload["offset"], dtype=np.float64),
        scale=np.array(payload["scale"], dtype=np.float64),
        constant=np.array(payload["constant"], dtype=bool),
        features=tuple(payload["features"]),
    )
