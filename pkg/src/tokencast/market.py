"""Daily OHLCV + market-cap series: CSV ingestion, typical prices, log returns.

All dates are UTC calendar days; intraday timestamps in input files are
truncated to the day. Missing days are never interpolated.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import IO, Iterable, Mapping

from .errors import DataContractError, ParseError

DEFAULT_OHLCV_COLUMNS: dict[str, str] = {
    "date": "date",
    "open": "open",
    "high": "high",
    "low": "low",
    "close": "close",
    "volume": "volume",
    "market_cap": "market_cap",
}


class MissingColumn(ParseError):
    def __init__(self, name: str):
        super().__init__(f"required column {name!r} not found in header")
        self.name = name


class MalformedRow(ParseError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateDate(ParseError):
    def __init__(self, day: date):
        super().__init__(f"duplicate date {day.isoformat()}")
        self.date = day


class EmptySeries(ParseError):
    def __init__(self, detail: str = "no data rows"):
        super().__init__(detail)


class TooShort(DataContractError):
    pass


class NonPositivePrice(DataContractError):
    def __init__(self, day: date):
        super().__init__(f"non-positive typical price on {day.isoformat()}")
        self.date = day


@dataclass(frozen=True, slots=True)
class OhlcvBar:
    """One trading day. Prices and market cap in USD, volume in token units."""

    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float
    market_cap: float

    def __post_init__(self):
        for name in ("open", "high", "low", "close", "market_cap"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not math.isfinite(self.volume) or self.volume < 0.0:
            raise ValueError(f"volume must be finite and >= 0, got {self.volume!r}")
        if self.high < self.low:
            raise ValueError(f"high {self.high} below low {self.low}")
        if self.high < max(self.open, self.close):
            raise ValueError(f"high {self.high} below max(open, close)")
        if self.low > min(self.open, self.close):
            raise ValueError(f"low {self.low} above min(open, close)")


def typical_price(bar: OhlcvBar) -> float:
    """Smoothed daily price indicator: mean of high, low and close."""
    return (bar.high + bar.low + bar.close) / 3.0


@dataclass(frozen=True)
class PriceSeries:
    """Bars in strictly increasing date order plus their typical prices."""

    bars: tuple[OhlcvBar, ...]
    typical: tuple[float, ...]

    def __post_init__(self):
        if len(self.bars) != len(self.typical):
            raise ValueError("typical must have one entry per bar")
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise ValueError("bar dates must be strictly increasing")
        for bar, tau in zip(self.bars, self.typical):
            if not bar.low <= tau <= bar.high:
                raise ValueError(f"typical price {tau} outside [low, high] on {bar.date}")

    @classmethod
    def from_bars(cls, bars: Iterable[OhlcvBar]) -> "PriceSeries":
        """Sort bars ascending, reject duplicate dates, compute typical prices."""
        ordered = sorted(bars, key=lambda b: b.date)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.date == prev.date:
                raise DuplicateDate(cur.date)
        # clamp guards against 1-ulp rounding of the mean on degenerate bars
        taus = tuple(min(max(typical_price(b), b.low), b.high) for b in ordered)
        return cls(tuple(ordered), taus)

    def __len__(self) -> int:
        return len(self.bars)

    def dates(self) -> list[date]:
        return [b.date for b in self.bars]

    def missing_days(self) -> list[date]:
        """Calendar days absent between the first and last bar."""
        gaps: list[date] = []
        for prev, cur in zip(self.bars, self.bars[1:]):
            day = prev.date + timedelta(days=1)
            while day < cur.date:
                gaps.append(day)
                day += timedelta(days=1)
        return gaps

    def is_contiguous(self) -> bool:
        return not self.missing_days()


@dataclass(frozen=True, slots=True)
class ReturnPoint:
    """Log return stamped with the day it is observed *from*.

    The value is realized once the following day closes; downstream feature
    construction relies on this stamping for its no-lookahead alignment.
    """

    date: date
    r: float

    def __post_init__(self):
        if not math.isfinite(self.r):
            raise ValueError(f"return must be finite, got {self.r!r}")


def log_returns(series: PriceSeries) -> list[ReturnPoint]:
    """Day-over-day log ratios of typical prices.

    Output element t carries the date of day t and ln(tau[t+1]) - ln(tau[t]);
    length is len(series) - 1.
    """
    if len(series) < 2:
        raise TooShort("need at least 2 bars to compute returns")
    out = []
    for bar, tau, tau_next in zip(series.bars, series.typical, series.typical[1:]):
        if tau <= 0.0 or tau_next <= 0.0:
            raise NonPositivePrice(bar.date)
        out.append(ReturnPoint(bar.date, math.log(tau_next) - math.log(tau)))
    return out


def _as_text(source: str | Path | IO[str] | IO[bytes]) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    if hasattr(source, "read"):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    raise TypeError(f"unsupported source type {type(source)!r}")


def _parse_day(text: str) -> date:
    s = text.strip()
    if not s:
        raise ValueError("empty date")
    try:
        return date.fromisoformat(s)
    except ValueError:
        pass
    return datetime.fromisoformat(s.replace("Z", "+00:00")).date()


def parse_ohlcv_csv(
    source: str | Path | IO[str] | IO[bytes],
    columns: Mapping[str, str] | None = None,
    delimiter: str = ",",
) -> PriceSeries:
    """Parse a delimited OHLCV table into a PriceSeries.

    The header row must contain the mapped column names (extra columns are
    ignored). Rows are sorted ascending by date. A row that fails the bar
    invariants aborts the parse with its line number; duplicate dates and an
    empty table are also rejected.
    """
    colmap = dict(DEFAULT_OHLCV_COLUMNS)
    if columns:
        colmap.update(columns)

    stream = _as_text(source)
    reader = csv.reader(stream, delimiter=delimiter)
    header = next(reader, None)
    if header is None:
        raise EmptySeries("empty file")
    names = [h.strip() for h in header]
    index: dict[str, int] = {}
    for field, column in colmap.items():
        try:
            index[field] = names.index(column)
        except ValueError:
            raise MissingColumn(column) from None

    bars: list[OhlcvBar] = []
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        line = reader.line_num
        try:
            cells = {f: row[i] for f, i in index.items()}
        except IndexError:
            raise MalformedRow(line, f"expected at least {max(index.values()) + 1} fields, got {len(row)}") from None
        try:
            bar = OhlcvBar(
                date=_parse_day(cells["date"]),
                open=float(cells["open"]),
                high=float(cells["high"]),
                low=float(cells["low"]),
                close=float(cells["close"]),
                volume=float(cells["volume"]),
                market_cap=float(cells["market_cap"]),
            )
        except ValueError as exc:
            raise MalformedRow(line, str(exc)) from None
        bars.append(bar)

    if not bars:
        raise EmptySeries()
    return PriceSeries.from_bars(bars)


def write_ohlcv_csv(
    series: PriceSeries,
    dest: str | Path | IO[str],
    delimiter: str = ",",
) -> None:
    """Serialize a PriceSeries in the input format plus a `typical` column.

    Floats are written with repr so parse -> serialize -> parse round-trips
    to identical bars.
    """
    own = isinstance(dest, (str, Path))
    out = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["date", "open", "high", "low", "close", "volume", "market_cap", "typical"])
        for bar, tau in zip(series.bars, series.typical):
            writer.writerow(
                [
                    bar.date.isoformat(),
                    repr(bar.open),
                    repr(bar.high),
                    repr(bar.low),
                    repr(bar.close),
                    repr(bar.volume),
                    repr(bar.market_cap),
                    repr(tau),
                ]
            )
    finally:
        if own:
            out.close()
