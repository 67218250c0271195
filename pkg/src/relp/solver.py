"""Single-period rebalancing solves: the LP and its robust SOCP extension.

Both problems optimize the transaction-cost-adjusted portfolio b (so 1'b can
fall below one; the gap is the cost share)::

    LP:    max  x~'b - lam*||bh - b||_1
    SOCP:  max  x~'b - lam*||bh - b||_1 - kappa*||U b||_2
    s.t.   1'b + gamma*||bh - b||_1 <= 1,  b >= 0

The investable pair is recovered as w = 1'b, portfolio = b / w. The robust
solve is valid only under the size condition max_i x~_i > kappa*sigma + lam;
callers must hold the previous portfolio when it fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditionError, ConfigError, SolverError
from .kernels import STATUS_FAILED, ipm_relp
from .predictors import ShapeFactor

ROUND_TOL = 1e-5
FEASTOL = 1e-8
GAPTOL = 1e-8
MAXITER = 200

STATUS_OPTIMAL = "optimal"
STATUS_FALLBACK = "fallback_hold"


@dataclass(frozen=True)
class RelpProblem:
    x_tilde: np.ndarray
    b_hat: np.ndarray
    lam: float
    kappa: float
    gamma: float
    shape: ShapeFactor | None = None

    def __post_init__(self):
        xt = np.asarray(self.x_tilde, dtype=np.float64)
        bh = np.asarray(self.b_hat, dtype=np.float64)
        if xt.shape != bh.shape or xt.ndim != 1:
            raise ConfigError("x_tilde and b_hat must be 1-D of equal length")
        if self.lam < 0 or self.kappa < 0 or self.gamma < 0:
            raise ConfigError("lam, kappa, gamma must be nonnegative")
        if self.gamma >= 1:
            raise ConfigError("gamma must be < 1")
        if self.shape is not None and self.shape.U.shape != (xt.size, xt.size):
            raise ConfigError("shape factor dimension mismatch")
        object.__setattr__(self, "x_tilde", xt)
        object.__setattr__(self, "b_hat", bh)

    @property
    def sigma(self) -> float:
        return self.shape.sigma if self.shape is not None else 0.0


@dataclass(frozen=True)
class RelpSolution:
    b_raw: np.ndarray        # cost-adjusted portfolio, small entries zeroed
    w: float                 # 1'b_raw
    b_portfolio: np.ndarray  # b_raw / w, on the simplex
    objective: float
    status: str


def check_condition(p: RelpProblem) -> bool:
    """True when the robust solve is valid: max_i x~_i > kappa*sigma + lam."""
    return bool(p.x_tilde.max() > p.kappa * p.sigma + p.lam)


def _objective(p: RelpProblem, b: np.ndarray, robust: bool) -> float:
    val = float(p.x_tilde @ b - p.lam * np.abs(p.b_hat - b).sum())
    if robust and p.shape is not None and p.kappa > 0:
        val -= p.kappa * float(np.linalg.norm(p.shape.U @ b))
    return val


def _hold_solution(p: RelpProblem, robust: bool) -> RelpSolution:
    b = p.b_hat.copy()
    return RelpSolution(b_raw=b, w=1.0, b_portfolio=b.copy(),
                        objective=_objective(p, b, robust), status=STATUS_FALLBACK)


def _solve(p: RelpProblem, kappa: float, robust: bool) -> RelpSolution:
    m = p.x_tilde.size
    use_soc = robust and kappa > 0 and p.shape is not None
    U = p.shape.U if use_soc else np.zeros((m, m))
    b, code, pres, dres, gap = ipm_relp(
        p.x_tilde, p.b_hat, p.lam, kappa if use_soc else 0.0, p.gamma,
        np.ascontiguousarray(U), use_soc, FEASTOL, GAPTOL, MAXITER)[:5]
    if code == STATUS_FAILED:
        raise SolverError(
            f"no solution within tolerances (pres={pres:.2e}, dres={dres:.2e}, "
            f"gap={gap:.2e})")
    b = np.where(b < ROUND_TOL, 0.0, b)
    w = float(b.sum())
    if w <= 0.0:
        return _hold_solution(p, robust)
    return RelpSolution(b_raw=b, w=w, b_portfolio=b / w,
                        objective=_objective(p, b, robust), status=STATUS_OPTIMAL)


def solve_relp_lp(p: RelpProblem) -> RelpSolution:
    """Solve the LP (no uncertainty term, whatever kappa says)."""
    return _solve(p, 0.0, robust=False)


def solve_relp_socp(p: RelpProblem) -> RelpSolution:
    """Solve the robust problem; requires the size condition to hold.

    With kappa == 0 the cone term vanishes and this coincides with the LP.
    """
    if p.kappa > 0 and p.shape is None:
        raise ConfigError("kappa > 0 requires a shape factor")
    if not check_condition(p):
        raise ConditionError(
            f"max x~ = {p.x_tilde.max():.4f} <= kappa*sigma + lam = "
            f"{p.kappa * p.sigma + p.lam:.4f}")
    return _solve(p, p.kappa, robust=True)
