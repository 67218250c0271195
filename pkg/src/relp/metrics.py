"""Performance statistics over wealth series and trade logs.

Undefined values (zero variance, zero drawdown, no market series) are NaN
in memory and serialize as ``null`` in JSON and ``"NA"`` in CSV. Per-period
returns use the unit initial wealth as the period-0 base, so a series of n
wealth points yields n returns, the first being S_1 - 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import DataError

PERIODS_PER_YEAR = 252
RF_ANNUAL = 0.04


@dataclass(frozen=True)
class WealthSeries:
    """Cumulative wealth S_1..S_n with implicit S_0 = 1."""

    S: np.ndarray
    periods_per_year: int = PERIODS_PER_YEAR

    def __post_init__(self):
        S = np.ascontiguousarray(self.S, dtype=np.float64)
        if S.ndim != 1 or S.size < 1:
            raise DataError("wealth series must be a nonempty vector")
        if not (S > 0).all():
            raise DataError("wealth must stay positive")
        S.flags.writeable = False
        object.__setattr__(self, "S", S)

    @property
    def n(self) -> int:
        return self.S.size

    @property
    def returns(self) -> np.ndarray:
        r = np.empty(self.n)
        r[0] = self.S[0] - 1.0
        r[1:] = self.S[1:] / self.S[:-1] - 1.0
        return r


def cumulative_wealth(ws: WealthSeries) -> float:
    return float(ws.S[-1])


def max_drawdown(ws: WealthSeries) -> float:
    peaks = np.maximum.accumulate(ws.S)
    return float(((peaks - ws.S) / peaks).max())


def sharpe_daily(ws: WealthSeries, rf_annual: float = RF_ANNUAL) -> float:
    ex = ws.returns - rf_annual / ws.periods_per_year
    if ex.size < 2:
        return math.nan
    sd = ex.std(ddof=1)
    if sd == 0.0:
        return math.nan
    return float(ex.mean() / sd)


def calmar(ws: WealthSeries) -> float:
    mdd = max_drawdown(ws)
    if mdd == 0.0:
        return math.nan
    ann = float(ws.S[-1]) ** (ws.periods_per_year / ws.n) - 1.0
    return ann / mdd


def mer(ws: WealthSeries, market_ws: WealthSeries) -> float:
    return float(ws.returns.mean() - market_ws.returns.mean())


def information_ratio(ws: WealthSeries, market_ws: WealthSeries) -> float:
    d = ws.returns - market_ws.returns
    if d.size < 2:
        return math.nan
    sd = d.std(ddof=1)
    if sd == 0.0:
        return math.nan
    return float(d.mean() / sd)


def var95(ws: WealthSeries, level: float = 95.0) -> float:
    """Linear-interpolated (type-7) percentile of per-period losses."""
    return float(np.percentile(-ws.returns, level))


def average_turnover(trade_log) -> float:
    """(1/2n) * sum_t ||bhat_{t-1} - w_{t-1} b_t||_1 with bhat_0 = 0."""
    b = trade_log.b
    w = trade_log.w
    prev_hat = np.vstack([np.zeros((1, b.shape[1])), trade_log.b_hat[:-1]])
    terms = np.abs(prev_hat - w[:, None] * b).sum(axis=1)
    return float(terms.sum() / (2.0 * b.shape[0]))


def relative_ranking(stats) -> np.ndarray:
    """Min-max normalization to [0, 1]; all-equal inputs map to all ones."""
    s = np.asarray(stats, dtype=np.float64)
    best = s.max()
    worst = s.min()
    if best == worst:
        return np.ones_like(s)
    return (s - worst) / (best - worst)


@dataclass(frozen=True)
class MetricReport:
    cumulative_wealth: float
    mer: float
    sharpe_daily: float
    calmar: float
    information_ratio: float
    max_drawdown: float
    var95: float
    average_turnover: float

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = None if isinstance(v, float) and math.isnan(v) else v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def csv_values(self) -> list[str]:
        vals = []
        for f in fields(self):
            v = getattr(self, f.name)
            vals.append("NA" if isinstance(v, float) and math.isnan(v) else repr(v))
        return vals

    @staticmethod
    def csv_header() -> list[str]:
        return [f.name for f in fields(MetricReport)]


def compute_report(ws: WealthSeries, trade_log=None,
                   market_ws: WealthSeries | None = None,
                   rf_annual: float = RF_ANNUAL) -> MetricReport:
    return MetricReport(
        cumulative_wealth=cumulative_wealth(ws),
        mer=mer(ws, market_ws) if market_ws is not None else math.nan,
        sharpe_daily=sharpe_daily(ws, rf_annual),
        calmar=calmar(ws),
        information_ratio=(information_ratio(ws, market_ws)
                           if market_ws is not None else math.nan),
        max_drawdown=max_drawdown(ws),
        var95=var95(ws),
        average_turnover=(average_turnover(trade_log)
                          if trade_log is not None else math.nan),
    )
