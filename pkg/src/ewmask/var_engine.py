"""VaR forecasts: Cornish-Fisher parametric, historical and filtered historical.

VaR is a positive loss in percent; a violation is a return below -VaR.
A forecast dated t uses information up to t-1 only. For horizons of x days
the forecast dated t covers the cumulative return r_t + ... + r_{t+x-1}.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import InputError
from .gram_charlier import GAUSSIAN, ShapePair

logger = logging.getLogger(__name__)

MODEL_TAGS = ("HS", "FHS", "RiskMetrics", "EWMA-SK", "GARCH-N")
PARAMETRIC_MODELS = ("RiskMetrics", "EWMA-SK", "GARCH-N")


@dataclass(frozen=True)
class CfOptions:
    """Cornish-Fisher variants kept for comparison with the default."""

    raw_kurtosis: bool = False  # use k instead of k - 3 in the kurtosis term
    full: bool = False  # add the second-order skew**2 term


@dataclass(frozen=True)
class VaRQuery:
    confidence_alpha: float
    horizon_days: int = 1
    model_tag: str = "EWMA-SK"

    def __post_init__(self):
        if not 0.0 < self.confidence_alpha <= 0.5:
            raise ValueError(f"confidence_alpha must lie in (0, 0.5], got {self.confidence_alpha}")
        if int(self.horizon_days) != self.horizon_days or self.horizon_days < 1:
            raise ValueError(f"horizon_days must be a positive integer, got {self.horizon_days}")
        if self.model_tag not in MODEL_TAGS:
            raise ValueError(f"unknown model {self.model_tag!r}; expected one of {MODEL_TAGS}")


@dataclass(frozen=True)
class VaRSeries:
    dates: np.ndarray
    var_loss: np.ndarray
    query: VaRQuery
    warnings: tuple = field(default=())

    def __len__(self):
        return self.var_loss.shape[0]

    def rows(self):
        q = self.query
        for d, v in zip(self.dates, self.var_loss):
            yield str(d), q.model_tag, q.confidence_alpha, q.horizon_days, float(v)

    def to_dict(self):
        return {
            "model": self.query.model_tag,
            "alpha": self.query.confidence_alpha,
            "horizon": self.query.horizon_days,
            "date": [str(d) for d in self.dates],
            "var_loss": self.var_loss.tolist(),
            "warnings": list(self.warnings),
        }


def normal_quantile(alpha):
    """z = Phi^-1(1 - alpha)."""
    return float(-ndtri(alpha))


def cornish_fisher_quantile(alpha, shape: ShapePair = GAUSSIAN, options: CfOptions = CfOptions()):
    """Positive standardized loss quantile from the Cornish-Fisher expansion.

    z * {1 + (s/6)(z^2 - 1) + ((k - 3)/24)(z^3 - 3z)} with z = Phi^-1(1 - alpha),
    written as z + (s/6)(z^2 - 1)z + ... so that it reduces to z at (0, 3).
    """
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5], got {alpha}")
    z = normal_quantile(alpha)
    s = shape.skew
    ex = shape.kurt if options.raw_kurtosis else shape.kurt - 3.0
    q = z * (1.0 + (s / 6.0) * (z * z - 1.0) + (ex / 24.0) * (z**3 - 3.0 * z))
    if options.full:
        q -= (2.0 * z**3 - 5.0 * z) * s * s / 36.0
    return q


def parametric_var(mu, sigma, quantile):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return quantile * sigma - mu


def _lower_order_statistic(window, alpha):
    x = np.asarray(window, dtype=np.float64)
    n = x.shape[0]
    need = math.ceil(1.0 / alpha - 1e-12)
    if n < need:
        raise InputError(f"window of {n} observations is shorter than ceil(1/alpha) = {need}")
    k = max(1, math.ceil(alpha * n - 1e-12))
    return float(np.partition(x, k - 1)[k - 1])


def historical_simulation(window, alpha):
    """Loss at the k-th smallest return, k = ceil(alpha * N)."""
    return -_lower_order_statistic(window, alpha)


def filtered_historical_simulation(std_residuals, sigma_forecast, alpha):
    if not sigma_forecast > 0:
        raise ValueError(f"sigma_forecast must be positive, got {sigma_forecast}")
    q = _lower_order_statistic(std_residuals, alpha)
    if q >= 0:
        logger.warning("degenerate FHS window: empirical quantile %.6g is not negative", q)
    return -q * sigma_forecast


def rescale_moments(mu, sigma, skew, kurt, x):
    """Moments of the sum of x i.i.d. one-period increments."""
    if int(x) != x or x < 1:
        raise ValueError(f"x must be an integer >= 1, got {x}")
    return x * mu, math.sqrt(x) * sigma, skew / math.sqrt(x), (kurt + 3.0 * (x - 1)) / x


@dataclass(frozen=True)
class ForecastState:
    """One-step-ahead mean, volatility and shape for a parametric model."""

    mu: float
    sigma: float
    shape: ShapePair = GAUSSIAN


def forecast_var(state: ForecastState, query: VaRQuery, options: CfOptions = CfOptions()):
    """Parametric VaR for one date. Horizons above one day use moment rescaling."""
    if query.model_tag not in PARAMETRIC_MODELS:
        raise ValueError(f"forecast_var handles parametric models only, got {query.model_tag!r}")
    shape = state.shape if query.model_tag == "EWMA-SK" else GAUSSIAN
    mu, sigma, skew, kurt = rescale_moments(state.mu, state.sigma, shape.skew, shape.kurt, query.horizon_days)
    q = cornish_fisher_quantile(query.confidence_alpha, ShapePair(skew, kurt), options)
    return parametric_var(mu, sigma, q)


def forecast_dates(dates, horizon, overlapping=True):
    """Positions of the forecast dates for a horizon, given the out-of-sample dates."""
    n = len(dates)
    if horizon == 1:
        return np.arange(n)
    last = n - horizon + 1
    if last <= 0:
        return np.arange(0)
    return np.arange(0, last, 1 if overlapping else horizon)


def aggregate_returns(returns, horizon, positions):
    """Cumulative log return over ``horizon`` days starting at each position."""
    r = np.asarray(returns, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(r)])
    return c[positions + horizon] - c[positions]


def parametric_var_series(dates, mu, variance, third, fourth, query: VaRQuery,
                          options: CfOptions = CfOptions(), positions=None) -> VaRSeries:
    """Parametric VaR at each position of the state arrays (states dated at the forecast date)."""
    pos = np.arange(len(dates)) if positions is None else np.asarray(positions)
    out = np.empty(pos.shape[0])
    for j, i in enumerate(pos):
        state = ForecastState(mu, math.sqrt(variance[i]), ShapePair(float(third[i]), float(fourth[i])))
        out[j] = forecast_var(state, query, options)
    return VaRSeries(np.asarray(dates)[pos], out, query)


def hs_var_series(returns, dates, start, query: VaRQuery, positions=None, window=None) -> VaRSeries:
    """HS VaR for forecast positions ``start + positions``, from returns strictly before each date.

    ``window=None`` uses every earlier observation; an integer keeps the last ``window``.
    """
    r = np.asarray(returns, dtype=np.float64)
    pos = np.arange(len(r) - start) if positions is None else np.asarray(positions)
    scale = math.sqrt(query.horizon_days)
    out = np.empty(pos.shape[0])
    for j, p in enumerate(pos):
        t = start + p
        lo = 0 if window is None else max(0, t - window)
        out[j] = scale * historical_simulation(r[lo:t], query.confidence_alpha)
    return VaRSeries(np.asarray(dates)[start + pos], out, query)


def fhs_var_series(std_residuals, variance, dates, start, query: VaRQuery, positions=None,
                   window=None) -> VaRSeries:
    """FHS VaR: empirical quantile of earlier standardized residuals times the forecast sigma."""
    z = np.asarray(std_residuals, dtype=np.float64)
    pos = np.arange(len(z) - start) if positions is None else np.asarray(positions)
    scale = math.sqrt(query.horizon_days)
    out = np.empty(pos.shape[0])
    warnings = []
    for j, p in enumerate(pos):
        t = start + p
        lo = 0 if window is None else max(0, t - window)
        out[j] = scale * filtered_historical_simulation(z[lo:t], math.sqrt(variance[t]), query.confidence_alpha)
        if out[j] <= 0:
            warnings.append(f"degenerate FHS window at {dates[t]}: nonpositive VaR {out[j]:.6g}")
    return VaRSeries(np.asarray(dates)[start + pos], out, query, tuple(warnings))


def var_series_csv(series_list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "model", "alpha", "horizon", "var_loss"])
    for s in series_list:
        for d, m, a, h, v in s.rows():
            w.writerow([d, m, repr(float(a)), h, repr(v)])
    return buf.getvalue()


def read_var_csv(path):
    """Parse a VaR CSV into {(model, alpha, horizon): (dates, var_loss)}. Comment lines are skipped."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != ["date", "model", "alpha", "horizon", "var_loss"]:
        raise InputError(f"{path}: unexpected VaR CSV header {header!r}")
    for n, row in enumerate(reader, start=2):
        try:
            key = (row[1], float(row[2]), int(row[3]))
            out.setdefault(key, ([], []))
            out[key][0].append(np.datetime64(row[0], "D"))
            out[key][1].append(float(row[4]))
        except (ValueError, IndexError):
            raise InputError(f"{path}: row {n}: malformed VaR record {row!r}") from None
    return {k: (np.array(d, dtype="datetime64[D]"), np.array(v)) for k, (d, v) in out.items()}
