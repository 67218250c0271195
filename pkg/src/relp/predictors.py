"""Return predictor and ellipsoid shape factor.

The moving-average reversion predictor for the coming period, evaluated
after observing relatives through row t, is

    x~ = (1/W) * (1 + 1/x_t + 1/(x_t*x_{t-1}) + ... )        (W terms)

which equals the W-period price average divided by the latest price, written
purely in relatives so absolute prices are never needed. The shape factor is
the Cholesky factor U (upper triangular, Sigma = U'U) of the sample
covariance of the most recent m+1 relative rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HistoryError
from .market_data import RelativesMatrix

CHOL_EPS = 1e-8


@dataclass(frozen=True)
class ShapeFactor:
    """Upper-triangular U with Sigma = U'U, and sigma = ||U||_F."""

    U: np.ndarray
    sigma: float


def _values(relatives) -> np.ndarray:
    if isinstance(relatives, RelativesMatrix):
        return relatives.values
    return np.asarray(relatives, dtype=np.float64)


def mar_predictor(relatives, t: int, window: int) -> np.ndarray:
    """Predictor from the last ``window`` prices ending at row t (1-based).

    Accepts a RelativesMatrix or a bare (n, m) array of relatives.
    """
    vals = _values(relatives)
    if window < 1:
        raise HistoryError(f"window must be >= 1, got {window}")
    if t < window:
        raise HistoryError(f"need t >= {window} rows of history, got {t}")
    if t > vals.shape[0]:
        raise HistoryError(f"t={t} beyond available {vals.shape[0]} rows")
    m = vals.shape[1]
    acc = np.ones(m)
    out = np.ones(m)
    for k in range(1, window):
        acc = acc * vals[t - k]
        out = out + 1.0 / acc
    return out / window


def shape_factor(relatives, t: int) -> ShapeFactor | None:
    """Covariance factor from the m+1 rows ending at t, or None.

    None signals insufficient data: fewer than m+1 rows of history, or a
    covariance that stays non positive definite after one ridge repair.
    The caller is expected to hold the previous portfolio in that case.
    """
    vals = _values(relatives)
    m = vals.shape[1]
    if t < m + 1 or t > vals.shape[0]:
        return None
    sample = vals[t - m - 1:t]
    cov = np.cov(sample, rowvar=False, ddof=1)
    cov = 0.5 * (cov + cov.T)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eps = CHOL_EPS * max(1.0, np.trace(cov) / m)
        try:
            L = np.linalg.cholesky(cov + eps * np.eye(m))
        except np.linalg.LinAlgError:
            return None
    U = np.ascontiguousarray(L.T)
    return ShapeFactor(U=U, sigma=float(np.linalg.norm(U, "fro")))
