"""Backtest loop and the strategy library.

The loop charges proportional costs through the net-proportion equation every
period, including the initial purchase (holdings start at the zero vector)::

    b_1 = 1/m, bhat_0 = 0, S_0 = 1
    for t = 1..n:
        b_t     = strategy(history through t-1, bhat_{t-1})
        w_{t-1} = net proportion of rebalancing bhat_{t-1} -> b_t
        observe x_t
        S_t     = S_{t-1} * w_{t-1} * (b_t . x_t)
        bhat_t  = b_t * x_t / (b_t . x_t)

Strategies see only the rows observed so far (a read-only view) plus their
own state; two runs on identical inputs are bit-identical.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, SolverError
from .market_data import RelativesMatrix
from .metrics import WealthSeries
from .predictors import mar_predictor, shape_factor
from .solver import RelpProblem, check_condition, solve_relp_socp
from .transaction_cost import CostSpec, net_proportion

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9


def project_to_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-threshold)."""
    y = np.asarray(y, dtype=np.float64)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def _check_simplex(b: np.ndarray, who: str) -> np.ndarray:
    if b.ndim != 1:
        raise ContractError(f"{who} returned a non-vector portfolio")
    if b.min() < -1e-12:
        raise ContractError(f"{who} returned negative weight {b.min():.3e}")
    if abs(b.sum() - 1.0) > SIMPLEX_TOL:
        raise ContractError(f"{who} portfolio sums to {b.sum():.12f}")
    return np.maximum(b, 0.0)


class Strategy:
    """One portfolio decision per period, driven in period order.

    Subclasses implement ``next_portfolio``; ``start`` resets any state so a
    strategy instance can be reused across backtests.
    """

    name = "strategy"

    def start(self, m: int) -> None:
        pass

    def next_portfolio(self, t: int, history: np.ndarray, b_hat: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class TradeLog:
    """Per-period decisions: b_t, w_{t-1}, S_t, bhat_t (rows 1..n)."""

    b: np.ndarray
    w: np.ndarray
    S: np.ndarray
    b_hat: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            m = self.b.shape[1]
            wr.writerow(["t", "w", "S"] + [f"b_{i + 1}" for i in range(m)])
            for t in range(self.b.shape[0]):
                wr.writerow([t + 1, repr(float(self.w[t])), repr(float(self.S[t]))]
                            + [repr(float(x)) for x in self.b[t]])


@dataclass
class BacktestResult:
    wealth: WealthSeries
    trade_log: TradeLog
    strategy_name: str


def run_backtest(relatives: RelativesMatrix, strategy: Strategy,
                 spec: CostSpec) -> BacktestResult:
    vals = relatives.values
    n, m = vals.shape
    b_hat = np.zeros(m)
    S = 1.0
    bs = np.empty((n, m))
    ws = np.empty(n)
    Ss = np.empty(n)
    hats = np.empty((n, m))
    strategy.start(m)
    for t in range(1, n + 1):
        b = np.asarray(strategy.next_portfolio(t, vals[:t - 1], b_hat), dtype=np.float64)
        b = _check_simplex(b, strategy.name)
        w = net_proportion(b_hat, b, spec)
        x = vals[t - 1]
        ret = float(b @ x)
        S = S * w * ret
        b_hat = b * x / ret
        bs[t - 1] = b
        ws[t - 1] = w
        Ss[t - 1] = S
        hats[t - 1] = b_hat
    return BacktestResult(wealth=WealthSeries(Ss),
                          trade_log=TradeLog(b=bs, w=ws, S=Ss, b_hat=hats),
                          strategy_name=strategy.name)


# ---------------------------------------------------------------------------
# reference strategies
# ---------------------------------------------------------------------------


class Ubah(Strategy):
    """Buy and hold the equal-weight portfolio: never trades after entry."""

    name = "ubah"

    def next_portfolio(self, t, history, b_hat):
        if t == 1:
            return np.full(b_hat.size, 1.0 / b_hat.size)
        return b_hat


class Ucrp(Strategy):
    """Rebalance to equal weights every period."""

    name = "ucrp"

    def next_portfolio(self, t, history, b_hat):
        return np.full(b_hat.size, 1.0 / b_hat.size)


class ExponentialGradient(Strategy):
    """Multiplicative update toward last period's winners."""

    name = "eg"

    def __init__(self, eta: float = 0.05):
        if eta <= 0:
            raise ConfigError("eta must be positive")
        self.eta = eta
        self._b = None
        self._seen = 0

    def start(self, m):
        self._b = np.full(m, 1.0 / m)
        self._seen = 0

    def next_portfolio(self, t, history, b_hat):
        while self._seen < history.shape[0]:
            x = history[self._seen]
            ret = float(self._b @ x)
            g = self._b * np.exp(self.eta * x / ret)
            self._b = g / g.sum()
            self._seen += 1
        return self._b


class Olmar(Strategy):
    """Passive-aggressive step toward the moving-average reversion target."""

    name = "olmar"

    def __init__(self, eps: float = 10.0, window: int = 5):
        if eps <= 0 or window < 1:
            raise ConfigError("need eps > 0 and window >= 1")
        self.eps = eps
        self.window = window
        self._b = None
        self._seen = 0

    def start(self, m):
        self._b = np.full(m, 1.0 / m)
        self._seen = 0

    def next_portfolio(self, t, history, b_hat):
        while self._seen < history.shape[0]:
            self._seen += 1
            if self._seen < self.window:
                continue
            xt = mar_predictor(history, self._seen, self.window)
            centered = xt - xt.mean()
            denom = float(centered @ centered)
            if denom > 0.0:
                step = max(0.0, (self.eps - float(self._b @ xt)) / denom)
                self._b = project_to_simplex(self._b + step * centered)
        return self._b


@dataclass(frozen=True)
class RelpParams:
    """One expert configuration: cost rate, penalties, predictor window."""

    kappa: float
    lam: float
    gamma: float
    window: int = 5

    def __post_init__(self):
        if self.kappa < 0 or self.lam < 0:
            raise ConfigError("kappa and lam must be nonnegative")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must be in [0, 1)")
        if self.window < 1:
            raise ConfigError("window must be >= 1")


class RelpFixed(Strategy):
    """Robust rebalancing with fixed (kappa, lam); holds during warm-up,
    when the covariance factor is unavailable, when the size condition
    fails, and on solver failure."""

    name = "relp"

    def __init__(self, params: RelpParams):
        self.params = params

    def start(self, m):
        pass

    def next_portfolio(self, t, history, b_hat):
        m = b_hat.size
        if t == 1:
            return np.full(m, 1.0 / m)
        t_obs = history.shape[0]
        if t <= m + 1 or t_obs < self.params.window:
            return b_hat
        shape = shape_factor(history, t_obs)
        if shape is None:
            return b_hat
        xt = mar_predictor(history, t_obs, self.params.window)
        prob = RelpProblem(x_tilde=xt, b_hat=b_hat, lam=self.params.lam,
                           kappa=self.params.kappa, gamma=self.params.gamma,
                           shape=shape)
        if not check_condition(prob):
            return b_hat
        try:
            return solve_relp_socp(prob).b_portfolio
        except SolverError as err:
            log.warning("period %d: holding after solver failure: %s", t, err)
            return b_hat


def ubah() -> Strategy:
    return Ubah()


def ucrp() -> Strategy:
    return Ucrp()


def eg_strategy(eta: float = 0.05) -> Strategy:
    return ExponentialGradient(eta)


def olmar_strategy(eps: float = 10.0, window: int = 5) -> Strategy:
    return Olmar(eps, window)


def relp_fixed(params: RelpParams) -> Strategy:
    return RelpFixed(params)
