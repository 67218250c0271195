"""Proportional-cost accounting: the net-proportion balance equation.

Rebalancing from end-of-period holdings ``b_hat`` to target ``b_new`` under a
proportional rate ``gamma`` leaves the net fraction w of wealth invested,
where w solves  w + gamma * ||b_hat - w*b_new||_1 = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kernels import net_proportion_w

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class CostSpec:
    """Proportional cost rate, identical for buying and selling."""

    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}")


def net_proportion(b_hat: np.ndarray, b_new: np.ndarray, spec: CostSpec) -> float:
    """Unique root w in (0, 1] of the balance equation.

    ``b_hat`` is either on the simplex or all-zero (initial purchase, which
    is charged: w = 1/(1+gamma)). ``b_new`` must be on the simplex.
    """
    gamma = spec.gamma
    b_hat = np.asarray(b_hat, dtype=np.float64)
    b_new = np.asarray(b_new, dtype=np.float64)
    w = float(net_proportion_w(b_hat, b_new, gamma))
    resid = abs(w + gamma * np.abs(b_hat - w * b_new).sum() - 1.0)
    if resid > RESIDUAL_TOL:
        raise ArithmeticError(f"balance equation residual {resid:.3e}")
    return w


def net_proportion_bounds(b_hat: np.ndarray, b_new: np.ndarray, gamma: float):
    """Two-sided bracket for w when b_hat lies on the simplex."""
    d = float(np.abs(np.asarray(b_hat) - np.asarray(b_new)).sum())
    lo = (1.0 - gamma) / (1.0 - gamma + gamma * d)
    hi = (1.0 + gamma) / (1.0 + gamma + gamma * d)
    return lo, hi
