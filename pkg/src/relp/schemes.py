"""Adaptive parameter selection over pools of rebalancing experts.

Experts run the robust strategy side by side under different penalty or
uncertainty-size values, each with its own cost accounting and cumulative
wealth. Two selection rules drive the adaptive strategies:

* selection-of-the-best (SB): follow one expert; switch to a challenger only
  when its windowed mean wealth beats the tracked expert's mean by more than
  max(delta, z * sample std) -- an indifference zone plus a normal band;
* top-K: set the next uncertainty size to the geometric mean of the K values
  whose experts lead in cumulative wealth (geometric, because the input grid
  is log-spaced).

``relp_adap`` composes an outer SB selection over the rebalancing penalty
with a per-expert inner scheme over the uncertainty size (SB for variant 1,
top-5 for variant 2; the full cross of inner experts is maintained). The
benchmark scheme combinators from the comparison study are also provided.

Expert updates within a period are independent (the heavy solves go through
the batched kernel); the per-period scheme step is a sequential barrier.
Results are identical regardless of thread count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .kernels import (STATUS_FAILED, ipm_relp_batch, net_proportion_batch,
                      net_proportion_w)
from .predictors import mar_predictor, shape_factor
from .solver import FEASTOL, GAPTOL, MAXITER, ROUND_TOL
from .strategies import RelpFixed, RelpParams, Strategy, _check_simplex
from .transaction_cost import CostSpec

log = logging.getLogger(__name__)

DEFAULT_SB_WINDOW = 5
DEFAULT_Z = 1.96
DEFAULT_TOP_K = 5

# comparison schemes; letters follow the kappa study, roman the lambda study
SCHEME_KINDS = ("top5", "top3", "top1", "half_prev",
                "sb0", "sb02", "best", "avg_top5", "wavg_top5", "avg_all")
_SCHEME_ALIASES = {"a": "top5", "b": "top3", "c": "top1", "d": "half_prev",
                   "e": "sb0", "f": "sb02", "g": "best", "h": "avg_top5",
                   "i": "wavg_top5", "j": "avg_all"}
PARAM_SCHEMES = ("top5", "top3", "top1", "half_prev")


def log_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """Geometric sequence from lo to hi inclusive."""
    if lo <= 0 or hi <= 0 or count < 1:
        raise ConfigError("log grid needs positive endpoints and count >= 1")
    if count == 1:
        return np.array([lo])
    return np.exp(np.linspace(np.log(lo), np.log(hi), count))


def default_kappa_grid() -> np.ndarray:
    return log_grid(0.1, 10.0, 31)


def default_lambda_multipliers() -> np.ndarray:
    return log_grid(1.0, 100.0, 31)


@dataclass(frozen=True)
class SbState:
    """Tracked-expert state for the selection-of-the-best rule."""

    tracked: int
    window: int = DEFAULT_SB_WINDOW
    delta: float = 0.0
    z: float = DEFAULT_Z

    def __post_init__(self):
        if self.window < 2:
            raise ConfigError("SB window must be >= 2 (sample std needs it)")
        if self.delta < 0 or self.z < 0 or self.tracked < 0:
            raise ConfigError("invalid SB state")


@dataclass(frozen=True)
class TopKState:
    """Current uncertainty size driven by the K wealth-leading experts."""

    K: int
    grid: tuple
    current_kappa: float

    def __post_init__(self):
        if not 1 <= self.K <= len(self.grid):
            raise ConfigError("need 1 <= K <= grid size")


class ExpertPool:
    """Strategies run in lockstep over one data stream, each with its own
    cost accounting; wealth column j holds every expert's S_j."""

    def __init__(self, strategies, tags, cost: CostSpec):
        if len(strategies) != len(tags) or not strategies:
            raise ConfigError("need one tag per expert")
        self.strategies = list(strategies)
        self.tags = np.asarray(tags, dtype=np.float64)
        self.cost = cost
        self.portfolios = None
        self._b_hat = None
        self._S = None
        self._wealth = None

    @property
    def size(self) -> int:
        return len(self.strategies)

    def start(self, m: int) -> None:
        E = self.size
        for s in self.strategies:
            s.start(m)
        self.portfolios = np.zeros((E, m))
        self._b_hat = np.zeros((E, m))
        self._S = np.ones(E)
        self._wealth = [np.ones(E)]

    def advance(self, t: int, history: np.ndarray) -> None:
        """Settle period t-1 with its realized return, then collect every
        expert's decision for period t."""
        if t >= 2:
            x = history[t - 2]
            gamma = self.cost.gamma
            for e in range(self.size):
                w = net_proportion_w(self._b_hat[e], self.portfolios[e], gamma)
                ret = float(self.portfolios[e] @ x)
                self._S[e] *= w * ret
                self._b_hat[e] = self.portfolios[e] * x / ret
            self._wealth.append(self._S.copy())
        for e, s in enumerate(self.strategies):
            b = np.asarray(s.next_portfolio(t, history, self._b_hat[e]),
                           dtype=np.float64)
            self.portfolios[e] = _check_simplex(b, s.name)

    def wealth_matrix(self) -> np.ndarray:
        return np.stack(self._wealth, axis=1)

    def wealth_at(self, t: int) -> np.ndarray:
        return self._wealth[t]


def _wealth_of(pool) -> np.ndarray:
    return pool if isinstance(pool, np.ndarray) else pool.wealth_matrix()


def sb_step(pool, state: SbState, t: int) -> SbState:
    """Possibly move the tracked index, using wealth through column t.

    A challenger wins when its mean over the last ``window`` wealth points
    strictly exceeds the tracked expert's mean plus max(delta, z * std);
    among multiple winners the largest mean is taken, ties to the lowest
    index. ``pool`` may be an ExpertPool or a wealth matrix whose column j
    is S_j.
    """
    wm = _wealth_of(pool)
    W = state.window
    if t - W + 1 < 0 or t >= wm.shape[1]:
        raise ConfigError(f"need {W} wealth points ending at t={t}")
    win = wm[:, t - W + 1:t + 1]
    means = win.mean(axis=1)
    sd = float(win[state.tracked].std(ddof=1))
    limit = means[state.tracked] + max(state.delta, state.z * sd)
    cands = np.nonzero(means > limit)[0]
    cands = cands[cands != state.tracked]
    if cands.size == 0:
        return state
    best = int(cands[np.argmax(means[cands])])
    return replace(state, tracked=best)


def topk_step(pool, state: TopKState, t: int) -> TopKState:
    """Geometric mean of the K wealth-leading grid values at column t."""
    wm = _wealth_of(pool)
    wt = wm[:, t]
    order = np.argsort(-wt, kind="stable")
    top = order[:state.K]
    grid = np.asarray(state.grid, dtype=np.float64)
    kap = float(np.exp(np.log(grid[top]).mean()))
    return replace(state, current_kappa=kap)


def scheme_combinator(kind: str, pool, t: int, prev_kappa: float | None = None,
                      sb_state: SbState | None = None):
    """Output of one comparison scheme at period t.

    Parameter-update kinds return the next uncertainty size (float) from
    wealth through column t; portfolio kinds combine the experts' current
    proposals. SB kinds read ``sb_state`` (advance it separately with
    :func:`sb_step`).
    """
    kind = _SCHEME_ALIASES.get(kind, kind)
    if kind not in SCHEME_KINDS:
        raise ConfigError(f"unknown scheme {kind!r}; known: {SCHEME_KINDS}")
    wm = _wealth_of(pool)
    wt = wm[:, t]
    tags = pool.tags if hasattr(pool, "tags") else None
    ports = pool.portfolios if hasattr(pool, "portfolios") else None
    if kind in PARAM_SCHEMES:
        if tags is None:
            raise ConfigError("parameter schemes need a tagged pool")
        if kind == "half_prev":
            if prev_kappa is None:
                raise ConfigError("half_prev needs prev_kappa")
            best = int(np.argmax(wt))
            return 0.5 * float(tags[best]) + 0.5 * float(prev_kappa)
        K = {"top5": 5, "top3": 3, "top1": 1}[kind]
        st = TopKState(K=min(K, wt.size), grid=tuple(tags), current_kappa=float(tags[0]))
        return topk_step(wm, st, t).current_kappa
    if ports is None:
        raise ConfigError("portfolio schemes need a pool with proposals")
    if kind in ("sb0", "sb02"):
        if sb_state is None:
            raise ConfigError("SB schemes need sb_state")
        return ports[sb_state.tracked].copy()
    if kind == "best":
        return ports[int(np.argmax(wt))].copy()
    order = np.argsort(-wt, kind="stable")
    if kind == "avg_top5":
        top = order[:min(5, wt.size)]
        return ports[top].mean(axis=0)
    if kind == "wavg_top5":
        top = order[:min(5, wt.size)]
        wgt = wt[top] / wt[top].sum()
        return (wgt[:, None] * ports[top]).sum(axis=0)
    return ports.mean(axis=0)  # avg_all


class RelpPoolStrategy(Strategy):
    """One expert per grid value plus a combination scheme on top.

    ``vary`` picks which parameter the grid sweeps ("kappa" or "lambda");
    parameter-update schemes drive a master solver and only make sense for
    the kappa sweep.
    """

    def __init__(self, scheme: str, vary: str, grid, base: RelpParams,
                 sb_window: int = DEFAULT_SB_WINDOW, z: float = DEFAULT_Z):
        kind = _SCHEME_ALIASES.get(scheme, scheme)
        if kind not in SCHEME_KINDS:
            raise ConfigError(f"unknown scheme {scheme!r}")
        if vary not in ("kappa", "lambda"):
            raise ConfigError("vary must be 'kappa' or 'lambda'")
        if kind in PARAM_SCHEMES and vary != "kappa":
            raise ConfigError(f"scheme {kind} updates kappa; use vary='kappa'")
        self.kind = kind
        self.vary = vary
        self.grid = np.asarray(grid, dtype=np.float64)
        if self.grid.size == 0:
            raise ConfigError("empty grid")
        self.base = base
        self.name = f"relp-pool-{kind}"
        if vary == "kappa":
            experts = [RelpFixed(replace(base, kappa=float(g))) for g in self.grid]
        else:
            experts = [RelpFixed(replace(base, lam=float(g))) for g in self.grid]
        self.pool = ExpertPool(experts, self.grid, CostSpec(base.gamma))
        self._sb0 = SbState(tracked=0, window=sb_window,
                            delta=0.2 if kind == "sb02" else 0.0, z=z)
        self._sb = None
        self._master = None
        self._kappa = None

    def start(self, m):
        self.pool.start(m)
        self._sb = self._sb0
        self._kappa = float(np.exp(np.log(self.grid).mean()))
        self._master = RelpFixed(replace(self.base, kappa=self._kappa))
        self._master.start(m)

    def next_portfolio(self, t, history, b_hat):
        self.pool.advance(t, history)
        wm_len = t  # wealth columns S_0 .. S_{t-1}
        if self.kind in PARAM_SCHEMES:
            if t >= 2:
                self._kappa = scheme_combinator(
                    self.kind, self.pool, wm_len - 1, prev_kappa=self._kappa)
            self._master.params = replace(self.base, kappa=self._kappa)
            return self._master.next_portfolio(t, history, b_hat)
        if self.kind in ("sb0", "sb02"):
            if wm_len - 1 >= self._sb.window - 1 and t >= 2:
                self._sb = sb_step(self.pool, self._sb, wm_len - 1)
            return scheme_combinator(self.kind, self.pool, wm_len - 1,
                                     sb_state=self._sb)
        return scheme_combinator(self.kind, self.pool, wm_len - 1)


class RelpAdaptive(Strategy):
    """Fully adaptive strategy: outer SB over the penalty grid, with each
    penalty expert resolving the uncertainty size through its own inner
    pool (SB for variant 1, top-K for variant 2). The emitted portfolio is
    always the tracked penalty expert's portfolio for the period."""

    def __init__(self, variant: int, lambda_grid, kappa_grid, gamma: float,
                 window: int = 5, sb_window: int = DEFAULT_SB_WINDOW,
                 delta: float = 0.0, z: float = DEFAULT_Z,
                 top_k: int = DEFAULT_TOP_K):
        if variant not in (1, 2):
            raise ConfigError("variant must be 1 or 2")
        self.variant = variant
        self.lambda_grid = np.asarray(lambda_grid, dtype=np.float64)
        self.kappa_grid = np.asarray(kappa_grid, dtype=np.float64)
        if self.lambda_grid.size == 0 or self.kappa_grid.size == 0:
            raise ConfigError("empty parameter grid")
        if not 0 <= gamma < 1:
            raise ConfigError("gamma must be in [0, 1)")
        self.gamma = gamma
        self.window = window
        self.sb_window = sb_window
        self.delta = delta
        self.z = z
        self.top_k = min(top_k, self.kappa_grid.size)
        self.name = f"relp-adap-{variant}"
        self.trace = []

    def start(self, m):
        L = self.lambda_grid.size
        N = self.kappa_grid.size
        E = L * N + (L if self.variant == 2 else 0)
        self._m = m
        self._lams = np.repeat(self.lambda_grid, N)
        self._kaps = np.tile(self.kappa_grid, L)
        if self.variant == 2:
            k0 = float(np.exp(np.log(self.kappa_grid).mean()))
            self._lams = np.concatenate([self._lams, self.lambda_grid])
            self._kaps = np.concatenate([self._kaps, np.full(L, k0)])
        self._b = np.zeros((E, m))
        self._bhat = np.zeros((E, m))
        self._S = np.ones(E)
        self._wealth = [np.ones(E)]
        self._lam_b = np.zeros((L, m))
        self._lam_bhat = np.zeros((L, m))
        self._lam_S = np.ones(L)
        self._lam_wealth = [np.ones(L)]
        self._inner_sb = [SbState(0, self.sb_window, self.delta, self.z)
                          for _ in range(L)]
        self._inner_topk = [TopKState(self.top_k, tuple(self.kappa_grid),
                                      float(self._kaps[L * N + l] if self.variant == 2
                                            else self.kappa_grid[0]))
                            for l in range(L)]
        self._outer = SbState(0, self.sb_window, self.delta, self.z)
        self.trace = []

    def _settle(self, x):
        gamma = self.gamma
        w = net_proportion_batch(self._bhat, self._b, gamma)
        E = self._b.shape[0]
        ret = np.empty(E)
        for e in range(E):
            ret[e] = float(self._b[e] @ x)
        self._S *= w * ret
        self._bhat = self._b * x / ret[:, None]
        self._wealth.append(self._S.copy())
        L = self.lambda_grid.size
        wl = net_proportion_batch(self._lam_bhat, self._lam_b, gamma)
        retl = np.empty(L)
        for l in range(L):
            retl[l] = float(self._lam_b[l] @ x)
        self._lam_S *= wl * retl
        self._lam_bhat = self._lam_b * x / retl[:, None]
        self._lam_wealth.append(self._lam_S.copy())

    def _propose(self, t, history):
        """Fill self._b with every expert's decision for period t."""
        m = self._m
        t_obs = t - 1
        if t <= m + 1 or t_obs < self.window:
            self._b = self._bhat.copy()
            return
        shape = shape_factor(history, t_obs)
        if shape is None:
            self._b = self._bhat.copy()
            return
        xt = mar_predictor(history, t_obs, self.window)
        mask = xt.max() > self._kaps * shape.sigma + self._lams
        B, st = ipm_relp_batch(xt, shape.U, self._bhat, self._lams, self._kaps,
                               self.gamma, mask, FEASTOL, GAPTOL, MAXITER)
        B = np.where(B < ROUND_TOL, 0.0, B)
        wsum = B.sum(axis=1)
        ok = mask & (st != STATUS_FAILED) & (wsum > 0)
        nfail = int((mask & (st == STATUS_FAILED)).sum())
        if nfail:
            log.warning("period %d: %d expert solves failed; holding those", t, nfail)
        wsafe = np.where(wsum > 0, wsum, 1.0)
        self._b = np.where(ok[:, None], B / wsafe[:, None], self._bhat)

    def next_portfolio(self, t, history, b_hat):
        L = self.lambda_grid.size
        N = self.kappa_grid.size
        if t == 1:
            uniform = np.full(self._m, 1.0 / self._m)
            self._b[:] = uniform
            self._lam_b[:] = uniform
            self.trace.append((t, float(self.lambda_grid[0]),
                               self._trace_kappa(), 0))
            return uniform
        # settle period t-1 for every layer, then apply the scheme steps
        self._settle(history[t - 2])
        switched = 0
        last = t - 1  # wealth columns run S_0 .. S_{t-1}
        if last >= self.sb_window - 1:
            wm = np.stack(self._wealth[max(0, last - self.sb_window + 1):last + 1],
                          axis=1)
            if self.variant == 1:
                off = last - (wm.shape[1] - 1)
                for l in range(L):
                    self._inner_sb[l] = sb_step(wm[l * N:(l + 1) * N],
                                                self._inner_sb[l],
                                                wm.shape[1] - 1)
            lwm = np.stack(self._lam_wealth[max(0, last - self.sb_window + 1):last + 1],
                           axis=1)
            prev = self._outer.tracked
            self._outer = sb_step(lwm, self._outer, lwm.shape[1] - 1)
            switched = int(self._outer.tracked != prev)
        if self.variant == 2:
            wt = self._wealth[last]
            for l in range(L):
                self._inner_topk[l] = topk_step(
                    wt[l * N:(l + 1) * N][:, None], self._inner_topk[l], 0)
                self._kaps[L * N + l] = self._inner_topk[l].current_kappa
        self._propose(t, history)
        if self.variant == 1:
            for l in range(L):
                self._lam_b[l] = self._b[l * N + self._inner_sb[l].tracked]
        else:
            self._lam_b[:] = self._b[L * N:]
        out = self._lam_b[self._outer.tracked].copy()
        self.trace.append((t, float(self.lambda_grid[self._outer.tracked]),
                           self._trace_kappa(), switched))
        return out

    def _trace_kappa(self) -> float:
        l = self._outer.tracked
        if self.variant == 1:
            return float(self.kappa_grid[self._inner_sb[l].tracked])
        return float(self._inner_topk[l].current_kappa)

    def write_trace_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "tracked_lambda", "current_kappa", "switch_flag"])
            for row in self.trace:
                w.writerow([row[0], repr(row[1]), repr(row[2]), row[3]])


def relp_adap(variant: int, lambda_grid=None, kappa_grid=None, gamma: float = 0.0,
              window: int = 5, sb_window: int = DEFAULT_SB_WINDOW,
              delta: float = 0.0, z: float = DEFAULT_Z,
              top_k: int = DEFAULT_TOP_K) -> RelpAdaptive:
    """Assemble the adaptive strategy with its default grids.

    Defaults: 31 uncertainty sizes log-spaced on [0.1, 10], and penalty
    values gamma * (31 multipliers log-spaced on [1, 100]); SB window 5,
    delta 0, z 1.96.
    """
    if kappa_grid is None:
        kappa_grid = default_kappa_grid()
    if lambda_grid is None:
        lambda_grid = gamma * default_lambda_multipliers()
    return RelpAdaptive(variant, lambda_grid, kappa_grid, gamma, window,
                        sb_window, delta, z, top_k)
