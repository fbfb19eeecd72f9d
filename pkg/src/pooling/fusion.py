from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from src.core.errors import ConfigurationError, OrderMismatchError
from src.core.types import SimilarityMatrix


def fuse_scores(
    matrices: Sequence[SimilarityMatrix], weights: Optional[Sequence[float]] = None
) -> SimilarityMatrix:
    """Weighted entrywise sum (all-ones by default); MISSING anywhere stays MISSING."""
    if not matrices:
        raise ConfigurationError("fuse_scores needs at least one matrix")
    if weights is None:
        weights = [1.0] * len(matrices)
    if len(weights) != len(matrices):
        raise ConfigurationError(
            f"{len(weights)} weights given for {len(matrices)} matrices"
        )
    if any(w < 0 or not np.isfinite(w) for w in weights):
        raise ConfigurationError("Fusion weights must be finite and non-negative")

    first = matrices[0]
    for index, other in enumerate(matrices[1:], start=1):
        if not first.same_order(other):
            raise OrderMismatchError(
                f"Matrix {index} does not share the gallery/probe ordering of matrix 0"
            )

    scores = np.zeros(first.shape)
    missing = np.zeros(first.shape, dtype=bool)
    for weight, matrix in zip(weights, matrices):
        scores = scores + weight * matrix.scores
        missing |= matrix.missing
    return SimilarityMatrix(first.gallery_ids, first.probe_ids, scores, missing)
