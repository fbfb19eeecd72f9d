"""Triplet hinge objectives and their SGD updates.

TSE (similarity form):  max(0, alpha + a'W'Wn - a'W'Wp)
TDE (distance form):    max(0, alpha + |W(a - p)|^2 - |W(a - n)|^2)

Both hinge arguments are bilinear in W, so the gradient of the active
hinge is W times a symmetric M x M matrix.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

from src.core.errors import DimensionMismatchError, TrainingDivergenceError
from src.core.types import EmbeddingMatrix, Objective, Triplet
from src.embedding.normalize import l2_normalize_rows


def _vectors(W: np.ndarray, t: Triplet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    a, p, n = t.anchor.values, t.positive.values, t.negative.values
    if not (a.shape == p.shape == n.shape == (W.shape[1],)):
        raise DimensionMismatchError(
            f"Triplet dimensions {a.shape}, {p.shape}, {n.shape} do not match "
            f"a matrix with {W.shape[1]} columns"
        )
    return a, p, n


def tse_margin_violation(W: np.ndarray, a: np.ndarray, p: np.ndarray, n: np.ndarray, alpha: float) -> float:
    Wa = W @ a
    return float(alpha + Wa @ (W @ n) - Wa @ (W @ p))


def tde_margin_violation(W: np.ndarray, a: np.ndarray, p: np.ndarray, n: np.ndarray, alpha: float) -> float:
    dp = W @ (a - p)
    dn = W @ (a - n)
    return float(alpha + dp @ dp - dn @ dn)


def tse_gradient(W: np.ndarray, a: np.ndarray, p: np.ndarray, n: np.ndarray) -> np.ndarray:
    d = n - p
    return W @ (np.outer(a, d) + np.outer(d, a))


def tde_gradient(W: np.ndarray, a: np.ndarray, p: np.ndarray, n: np.ndarray) -> np.ndarray:
    u = a - p
    v = a - n
    return 2.0 * W @ (np.outer(u, u) - np.outer(v, v))


_VIOLATION = {Objective.TSE: tse_margin_violation, Objective.TDE: tde_margin_violation}
_GRADIENT = {Objective.TSE: tse_gradient, Objective.TDE: tde_gradient}


def hinge_loss(W: EmbeddingMatrix, t: Triplet, alpha: float, objective: Objective = Objective.TSE) -> float:
    a, p, n = _vectors(W.entries, t)
    return max(0.0, _VIOLATION[objective](W.entries, a, p, n, alpha))


def triplet_loss(W: EmbeddingMatrix, t: Triplet, alpha: float) -> float:
    return hinge_loss(W, t, alpha, Objective.TSE)


def tde_loss(W: EmbeddingMatrix, t: Triplet, alpha: float) -> float:
    return hinge_loss(W, t, alpha, Objective.TDE)


def sgd_update(
    W: np.ndarray,
    a: np.ndarray,
    p: np.ndarray,
    n: np.ndarray,
    eta: float,
    alpha: float,
    objective: Objective,
) -> Tuple[np.ndarray, float]:
    """One hinge-gated step on raw arrays; returns (W', loss before the step)."""
    violation = _VIOLATION[objective](W, a, p, n, alpha)
    if violation <= 0.0:
        return W, 0.0
    updated = W - eta * _GRADIENT[objective](W, a, p, n)
    if not np.all(np.isfinite(updated)):
        raise TrainingDivergenceError(
            f"{objective.value.upper()} update produced non-finite entries"
        )
    return updated, violation


def tse_sgd_step(W: EmbeddingMatrix, t: Triplet, eta: float, alpha: float) -> EmbeddingMatrix:
    a, p, n = _vectors(W.entries, t)
    updated, loss = sgd_update(W.entries, a, p, n, eta, alpha, Objective.TSE)
    return W if loss == 0.0 else EmbeddingMatrix(updated)


def tde_sgd_step(W: EmbeddingMatrix, t: Triplet, eta: float, alpha: float) -> EmbeddingMatrix:
    a, p, n = _vectors(W.entries, t)
    updated, loss = sgd_update(W.entries, a, p, n, eta, alpha, Objective.TDE)
    return W if loss == 0.0 else EmbeddingMatrix(updated)


def project(W: EmbeddingMatrix, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (W.cols,):
        raise DimensionMismatchError(
            f"Vector of shape {v.shape} cannot be projected by a {W.rows}x{W.cols} matrix"
        )
    return W.entries @ v


def project_rows(W: EmbeddingMatrix, X: np.ndarray, renormalize: bool = True) -> np.ndarray:
    """Project every row of X; re-normalize to unit length unless told not to."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != W.cols:
        raise DimensionMismatchError(
            f"Rows of shape {X.shape} cannot be projected by a {W.rows}x{W.cols} matrix"
        )
    projected = X @ W.entries.T
    if not renormalize:
        return projected
    return l2_normalize_rows(projected)
