from __future__ import annotations

from typing import Dict, Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.core.errors import ConfigurationError

FORBIDDEN_COST = 1e6


def hungarian_assign(cost: np.ndarray) -> Dict[int, int]:
    """Minimum-total-cost injective row -> column assignment.

    Rectangular matrices leave the surplus rows (or columns) unassigned.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ConfigurationError(f"Cost matrix must be 2-dimensional, got shape {cost.shape}")
    if cost.size == 0:
        return {}
    if not np.all(np.isfinite(cost)):
        raise ConfigurationError("Cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(cost)
    return {int(r): int(c) for r, c in zip(rows, cols)}


def assignment_cost(cost: np.ndarray, assignment: Mapping[int, int]) -> float:
    cost = np.asarray(cost, dtype=np.float64)
    return float(sum(cost[r, c] for r, c in assignment.items()))


def gated_assign(cost: np.ndarray, allowed: np.ndarray) -> Dict[int, int]:
    """Optimal assignment where pairs outside ``allowed`` may never be matched."""
    cost = np.asarray(cost, dtype=np.float64)
    allowed = np.asarray(allowed, dtype=bool)
    if cost.shape != allowed.shape:
        raise ConfigurationError(
            f"Gate of shape {allowed.shape} does not match costs of shape {cost.shape}"
        )
    assignment = hungarian_assign(np.where(allowed, cost, FORBIDDEN_COST))
    return {r: c for r, c in assignment.items() if allowed[r, c]}
