from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from src.core.errors import DegenerateInputError

STD_FLOOR = 1e-8


def l2_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateInputError(f"Cannot L2-normalize a vector of norm {norm}")
    return v / norm


def l2_normalize_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero((norms == 0.0) | ~np.isfinite(norms))
    if bad.size:
        raise DegenerateInputError(f"Rows {bad.tolist()} have zero or non-finite norm")
    return X / norms[:, None]


@dataclass(frozen=True, eq=False)
class PyramidLevel:
    """Features of one pyramid level, shaped (rows, cols, channels)."""

    level_index: int
    features: np.ndarray
    mean: Optional[np.ndarray] = None
    stddev: Optional[np.ndarray] = None


def normalize_pyramid(levels: Sequence[PyramidLevel]) -> List[PyramidLevel]:
    """z-score every level with its own per-channel statistics.

    Channels whose standard deviation falls below ``STD_FLOOR`` are divided
    by the floor, so constant channels come out as zeros.
    """
    normalized = []
    for level in levels:
        features = np.asarray(level.features, dtype=np.float64)
        if features.size == 0:
            raise DegenerateInputError(f"Pyramid level {level.level_index} is empty")
        channels = features.shape[-1]
        flat = features.reshape(-1, channels)
        mu = flat.mean(axis=0)
        sigma = flat.std(axis=0)
        scaled = (flat - mu) / np.maximum(sigma, STD_FLOOR)
        normalized.append(
            replace(
                level,
                features=scaled.reshape(features.shape),
                mean=mu,
                stddev=sigma,
            )
        )
    return normalized
