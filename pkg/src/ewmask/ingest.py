"""Price parsing, log returns, descriptive statistics and sample splitting."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import gammaincc

from .errors import InputError


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriceSeries:
    """Daily closing prices in index points, one per trading date."""

    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        dates = _frozen(self.dates, "datetime64[D]")
        prices = _frozen(self.prices, np.float64)
        if dates.shape != prices.shape or dates.ndim != 1:
            raise InputError("dates and prices must be 1-d arrays of equal length")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            i = int(np.argmin(dates[1:] > dates[:-1])) + 1
            raise InputError(f"dates must be strictly increasing (problem at {dates[i]})")
        bad = ~(np.isfinite(prices) & (prices > 0))
        if bad.any():
            i = int(np.argmax(bad))
            raise InputError(f"non-positive or non-finite price {prices[i]!r} on {dates[i]}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)

    def __len__(self):
        return self.prices.shape[0]


@dataclass(frozen=True)
class ReturnSeries:
    """Percentage log returns with an in-sample / out-of-sample split.

    Observations ``[:split_index]`` are in-sample, the rest out-of-sample.
    """

    dates: np.ndarray
    returns: np.ndarray
    split_index: int = -1

    def __post_init__(self):
        dates = _frozen(self.dates, "datetime64[D]")
        rets = _frozen(self.returns, np.float64)
        if dates.shape != rets.shape or rets.ndim != 1:
            raise InputError("dates and returns must be 1-d arrays of equal length")
        split = rets.shape[0] if self.split_index == -1 else int(self.split_index)
        if not 0 <= split <= rets.shape[0]:
            raise InputError(f"split_index {split} outside [0, {rets.shape[0]}]")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", rets)
        object.__setattr__(self, "split_index", split)

    def __len__(self):
        return self.returns.shape[0]

    @property
    def in_sample(self):
        return self.returns[: self.split_index]

    @property
    def out_of_sample(self):
        return self.returns[self.split_index :]

    @property
    def in_sample_dates(self):
        return self.dates[: self.split_index]

    @property
    def out_of_sample_dates(self):
        return self.dates[self.split_index :]


@dataclass(frozen=True)
class StatsSummary:
    mean: float
    std_dev: float
    minimum: float
    maximum: float
    skewness: float
    kurtosis: float
    jarque_bera: float
    jb_p_value: float
    count: int

    def to_dict(self):
        return {
            "mean": self.mean,
            "std_dev": self.std_dev,
            "minimum": self.minimum,
            "maximum": self.maximum,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "jarque_bera": self.jarque_bera,
            "jb_p_value": self.jb_p_value,
            "count": self.count,
        }


def read_price_csv(path) -> PriceSeries:
    """Read a ``date,price`` CSV (ISO dates, header required).

    Row numbers in error messages count the header as row 1.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    dates, prices = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "price"]:
            raise InputError(f"{path}: row 1: expected header 'date,price', got {header!r}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputError(f"{path}: row {row_no}: expected 2 fields, got {len(row)}")
            raw_date, raw_price = row[0].strip(), row[1].strip()
            try:
                day = dt.date.fromisoformat(raw_date)
            except ValueError:
                raise InputError(f"{path}: row {row_no}: bad ISO date {raw_date!r}") from None
            try:
                price = float(raw_price)
            except ValueError:
                raise InputError(f"{path}: row {row_no}: non-numeric price {raw_price!r}") from None
            if not math.isfinite(price) or price <= 0:
                raise InputError(f"{path}: row {row_no}: non-positive price {raw_price!r} on {day}")
            if dates and day <= dates[-1]:
                raise InputError(f"{path}: row {row_no}: date {day} not after {dates[-1]}")
            dates.append(day)
            prices.append(price)
    return PriceSeries(np.array(dates, dtype="datetime64[D]"), np.array(prices))


def compute_log_returns(prices: PriceSeries) -> ReturnSeries:
    """r_t = 100 * (ln p_t - ln p_{t-1}), dated at t. All observations in-sample."""
    if len(prices) < 2:
        raise InputError("need at least 2 prices to form a return")
    logp = np.log(prices.prices)
    rets = 100.0 * (logp[1:] - logp[:-1])
    return ReturnSeries(prices.dates[1:], rets, rets.shape[0])


def jarque_bera(skewness: float, kurtosis: float, count: int) -> tuple[float, float]:
    """Jarque-Bera statistic from raw (not excess) kurtosis; chi2(2) p-value."""
    if count < 4:
        raise InputError("Jarque-Bera needs count >= 4")
    stat = count * (skewness**2 / 6.0 + (kurtosis - 3.0) ** 2 / 24.0)
    return float(stat), float(gammaincc(1.0, stat / 2.0))


def descriptive_stats(returns) -> StatsSummary:
    """Table-style summary. Central moments use divisor ``count``.

    Accepts a ReturnSeries (all observations are used) or a plain array.
    """
    x = np.asarray(returns.returns if isinstance(returns, ReturnSeries) else returns, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        raise InputError("descriptive statistics need at least 4 observations")
    mean = float(np.mean(x))
    c = x - mean
    m2 = float(np.mean(c**2))
    if m2 <= 0.0 or m2 <= 1e-28 * max(mean * mean, 1.0):
        raise InputError("zero variance: skewness and kurtosis are undefined")
    m3 = float(np.mean(c**3))
    m4 = float(np.mean(c**4))
    skew = m3 / m2**1.5
    kurt = m4 / m2**2
    jb, p = jarque_bera(skew, kurt, n)
    return StatsSummary(
        mean=mean,
        std_dev=math.sqrt(m2),
        minimum=float(np.min(x)),
        maximum=float(np.max(x)),
        skewness=skew,
        kurtosis=kurt,
        jarque_bera=jb,
        jb_p_value=p,
        count=n,
    )


def split_sample(returns: ReturnSeries, out_of_sample_count: int) -> ReturnSeries:
    n = len(returns)
    if not 0 <= out_of_sample_count <= n:
        raise InputError(f"out-of-sample count {out_of_sample_count} outside [0, {n}]")
    return replace(returns, split_index=n - out_of_sample_count)
