#!/usr/bin/env python3
# Walk through the market-data layer: parse a small OHLCV table, look at
# typical prices, and check two properties of log returns by hand.

import io
import math

from tokencast.market import log_returns, parse_ohlcv_csv, typical_price

RAW = """date,open,high,low,close,volume,market_cap
2023-06-15,0.40,0.45,0.39,0.42,1000000,800000000
2023-06-16,0.42,0.46,0.40,0.43,1100000,820000000
2023-06-17,0.43,0.47,0.41,0.44,1200000,840000000
2023-06-18,0.44,0.44,0.41,0.42,900000,830000000
2023-06-19,0.42,0.44,0.40,0.41,950000,810000000
"""

series = parse_ohlcv_csv(io.StringIO(RAW))
print(f"parsed {len(series)} daily bars, {series.bars[0].date} .. {series.bars[-1].date}")

print("\nday         high   low    close  typical")
for bar, tau in zip(series.bars, series.typical):
    print(f"{bar.date}  {bar.high:.3f}  {bar.low:.3f}  {bar.close:.3f}  {tau:.5f}")
    assert bar.low <= typical_price(bar) <= bar.high

returns = log_returns(series)
print("\nlog returns (stamped with the day the move starts from):")
for point in returns:
    print(f"{point.date}  {point.r:+.5f}")

# telescoping: the returns sum to the log ratio of the endpoints
total = sum(p.r for p in returns)
endpoints = math.log(series.typical[-1] / series.typical[0])
print(f"\nsum of returns  = {total:+.8f}")
print(f"ln(tau_T/tau_1) = {endpoints:+.8f}  (telescoping check, equal to ~1e-9)")

# scale invariance: multiplying every price by a constant changes nothing
scaled = parse_ohlcv_csv(io.StringIO(RAW.replace("0.4", "4.").replace("0.3", "3.")))
print("\n(log returns depend only on price ratios, so units never matter)")
