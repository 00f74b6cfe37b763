"""Hit sequences, coverage likelihood-ratio tests, Basel zones and market risk capital."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import InputError
from .var_engine import VaRSeries

BASEL_WINDOW = 250
MRC_WINDOW = 60


def chi2_sf(stat, dof):
    """Upper tail of chi-square(dof) through the regularized incomplete gamma function."""
    if not np.isfinite(stat):
        return float("nan")
    return float(gammaincc(dof / 2.0, max(stat, 0.0) / 2.0))


def _nonneg(x):
    # LR statistics are nonnegative; rounding can leave -1e-13 or -0.0
    return max(x, 0.0) + 0.0


def _xlogy(x, y):
    # x * log(y) with 0 * log(0) = 0
    return 0.0 if x == 0 else x * math.log(y)


@dataclass(frozen=True)
class LrResult:
    statistic: float
    p_value: float

    def to_dict(self):
        return {"statistic": self.statistic, "p_value": self.p_value}


@dataclass(frozen=True)
class HitSequence:
    hits: np.ndarray
    alpha: float
    dates: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.hits, dtype=np.int8)
        if h.ndim != 1 or np.any((h != 0) & (h != 1)):
            raise ValueError("hits must be a 1-d sequence of 0/1")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "hits", h)

    def __len__(self):
        return self.hits.shape[0]

    @property
    def counts(self):
        """(n0, n1, n00, n01, n10, n11)."""
        h = self.hits
        n1 = int(h.sum())
        prev, cur = h[:-1], h[1:]
        n11 = int(np.sum(prev & cur))
        n10 = int(np.sum(prev & (1 - cur)))
        n01 = int(np.sum((1 - prev) & cur))
        n00 = int(len(h) - 1 - n11 - n10 - n01) if len(h) else 0
        return len(h) - n1, n1, n00, n01, n10, n11

    @property
    def first_failure(self):
        """1-based index of the first hit, or None."""
        idx = np.flatnonzero(self.hits)
        return int(idx[0]) + 1 if idx.size else None


def hit_sequence(returns, var_series: VaRSeries, return_dates=None) -> HitSequence:
    """hit_t = 1 iff r_t < -VaR_t (strict)."""
    r = np.asarray(returns, dtype=np.float64)
    v = np.asarray(var_series.var_loss, dtype=np.float64)
    if r.shape != v.shape:
        raise InputError(f"returns ({r.shape[0]}) and VaR series ({v.shape[0]}) differ in length")
    if return_dates is not None:
        rd = np.asarray(return_dates, dtype="datetime64[D]")
        vd = np.asarray(var_series.dates, dtype="datetime64[D]")
        bad = np.flatnonzero(rd != vd)
        if bad.size:
            i = int(bad[0])
            raise InputError(f"dates misaligned at position {i}: return {rd[i]} vs VaR {vd[i]}")
    return HitSequence((r < -v).astype(np.int8), var_series.query.confidence_alpha, var_series.dates)


def lr_tuff(first_failure_index, alpha):
    """Time-until-first-failure LR; ``None`` index means no exceptions (NaN result)."""
    if first_failure_index is None:
        return LrResult(float("nan"), float("nan"))
    n = int(first_failure_index)
    if n < 1:
        raise ValueError("first_failure_index must be >= 1")
    # both terms in the same form so that 1/n == alpha gives exactly 0
    null = math.log(alpha) + (n - 1) * math.log1p(-alpha)
    alt = math.log(1.0 / n) + ((n - 1) * math.log1p(-1.0 / n) if n > 1 else 0.0)
    stat = _nonneg(-2.0 * null + 2.0 * alt)
    return LrResult(stat, chi2_sf(stat, 1))


def lr_uc(n0, n1, p):
    if n0 < 0 or n1 < 0 or n0 + n1 < 1:
        raise ValueError("need n0, n1 >= 0 with n0 + n1 >= 1")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    pi = n1 / (n0 + n1)
    stat = -2.0 * (_xlogy(n1, p) + _xlogy(n0, 1.0 - p) - _xlogy(n1, pi) - _xlogy(n0, 1.0 - pi))
    stat = 0.0 if pi == p else _nonneg(stat)
    return LrResult(stat, chi2_sf(stat, 1))


def lr_ind(counts):
    """Markov independence LR from (n00, n01, n10, n11).

    With 0 log 0 = 0 the alternative loses its pi11 factor automatically when
    pi11 = 0 or no transition leaves a hit.
    """
    n00, n01, n10, n11 = (int(c) for c in counts)
    total = n00 + n01 + n10 + n11
    if total < 1:
        raise ValueError("lr_ind needs at least one transition")
    from0 = n00 + n01
    from1 = n10 + n11
    pi01 = n01 / from0 if from0 else 0.0
    pi11 = n11 / from1 if from1 else 0.0
    pi2 = (n01 + n11) / total
    null = _xlogy(n00 + n10, 1.0 - pi2) + _xlogy(n01 + n11, pi2)
    alt = _xlogy(n00, 1.0 - pi01) + _xlogy(n01, pi01) + _xlogy(n10, 1.0 - pi11) + _xlogy(n11, pi11)
    stat = 0.0 if pi01 == pi11 else _nonneg(-2.0 * (null - alt))
    return LrResult(stat, chi2_sf(stat, 1))


def lr_cc(uc, ind):
    uc = uc.statistic if isinstance(uc, LrResult) else uc
    ind = ind.statistic if isinstance(ind, LrResult) else ind
    if not (math.isfinite(uc) and math.isfinite(ind)):
        raise ValueError("lr_cc needs finite inputs")
    stat = uc + ind
    return LrResult(stat, chi2_sf(stat, 2))


@dataclass(frozen=True)
class BaselZone:
    zone: str
    violations: int
    multiplier: float

    def to_dict(self):
        return {"zone": self.zone, "violations": self.violations, "multiplier": self.multiplier}


def basel_zone(violations) -> BaselZone:
    x = int(violations)
    if x < 0:
        raise ValueError("violations must be nonnegative")
    if x <= 4:
        return BaselZone("green", x, 3.0)
    if x <= 9:
        return BaselZone("yellow", x, round(3.0 + 0.2 * (x - 4), 10))
    return BaselZone("red", x, 4.0)


def market_risk_capital(var_history, current_var, multiplier, credit_addon=0.0):
    h = np.asarray(var_history, dtype=np.float64)
    if h.size == 0:
        raise ValueError("var_history is empty")
    return max(float(current_var), multiplier * float(np.mean(h))) + credit_addon


def mrc_series(var_loss, hits, credit_addon=0.0):
    """Daily capital from the trailing 60 VaRs (current included).

    The multiplier at t comes from the hits of the 250 days before t, or all
    earlier days when fewer exist. Returns (positions, capital, multipliers).
    """
    v = np.asarray(var_loss, dtype=np.float64)
    h = np.asarray(hits)
    pos = np.arange(MRC_WINDOW - 1, v.shape[0])
    cap = np.empty(pos.shape[0])
    mult = np.empty(pos.shape[0])
    for j, t in enumerate(pos):
        s = basel_zone(int(h[max(0, t - BASEL_WINDOW):t].sum())).multiplier
        mult[j] = s
        cap[j] = market_risk_capital(v[t - MRC_WINDOW + 1:t + 1], v[t], s, credit_addon)
    return pos, cap, mult


@dataclass(frozen=True)
class BacktestReport:
    model: str
    alpha: float
    horizon: int
    observations: int
    violations: int
    failure_pct: float
    tuff: LrResult
    uc: LrResult
    ind: LrResult
    cc: LrResult
    basel: BaselZone
    first_failure: int | None = None
    mrc_dates: tuple | None = None
    mrc: tuple | None = None

    def to_dict(self):
        d = {
            "model": self.model,
            "alpha": self.alpha,
            "horizon": self.horizon,
            "observations": self.observations,
            "violations": self.violations,
            "failure_pct": self.failure_pct,
            "first_failure": self.first_failure,
            "lr_tuff": self.tuff.to_dict(),
            "lr_uc": self.uc.to_dict(),
            "lr_ind": self.ind.to_dict(),
            "lr_cc": self.cc.to_dict(),
            "basel": self.basel.to_dict(),
        }
        if self.first_failure is None:
            d["lr_tuff"]["outcome"] = "no exceptions"
        if self.mrc is not None:
            d["mrc"] = {"date": list(self.mrc_dates), "capital": list(self.mrc)}
        return d


def run_backtest(returns, var_series: VaRSeries, return_dates=None, credit_addon=0.0) -> BacktestReport:
    """Every test at the series' alpha, Basel zone over the last 250 observations.

    TUFF uses the first hit only. The MRC series is attached for 1-day
    forecasts once 60 VaR values are available.
    """
    hs = hit_sequence(returns, var_series, return_dates)
    n = len(hs)
    if n < 50:
        raise InputError(f"backtest needs at least 50 observations, got {n}")
    alpha = hs.alpha
    n0, n1, n00, n01, n10, n11 = hs.counts
    uc = lr_uc(n0, n1, alpha)
    ind = lr_ind((n00, n01, n10, n11))
    cc = lr_cc(uc, ind)
    tuff = lr_tuff(hs.first_failure, alpha)
    zone = basel_zone(int(hs.hits[-BASEL_WINDOW:].sum()))
    mrc_dates = mrc = None
    if var_series.query.horizon_days == 1 and n >= MRC_WINDOW:
        pos, cap, _ = mrc_series(var_series.var_loss, hs.hits, credit_addon)
        mrc_dates = tuple(str(var_series.dates[i]) for i in pos)
        mrc = tuple(float(c) for c in cap)
    return BacktestReport(
        model=var_series.query.model_tag, alpha=alpha, horizon=var_series.query.horizon_days,
        observations=n, violations=n1, failure_pct=100.0 * n1 / n, tuff=tuff, uc=uc, ind=ind, cc=cc,
        basel=zone, first_failure=hs.first_failure, mrc_dates=mrc_dates, mrc=mrc,
    )


def format_table(reports) -> str:
    """Plain-text table with one column per model: PF%, TUFF, UC, IND, CC and Basel zone."""
    reports = list(reports)
    if not reports:
        return ""
    head = ["", *[f"{r.model} {r.horizon}d" for r in reports]]

    def stat(t):
        return "n/a" if not math.isfinite(t.statistic) else f"{t.statistic:.3f}"

    lines = [
        ["PF (%)", *[f"{r.failure_pct:.2f}%" for r in reports]],
        ["TUFF", *[stat(r.tuff) for r in reports]],
        ["UC", *[stat(r.uc) for r in reports]],
        ["IND", *[stat(r.ind) for r in reports]],
        ["CC", *[stat(r.cc) for r in reports]],
        ["Basel", *[f"{r.basel.zone} ({r.basel.violations})" for r in reports]],
    ]
    widths = [max(len(row[i]) for row in [head, *lines]) for i in range(len(head))]
    fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
    return "\n".join([fmt(head), *[fmt(row) for row in lines]]) + "\n"
