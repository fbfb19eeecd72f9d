from typing import List, Union

import numpy as np

from src.core.errors import DegenerateInputError, DimensionMismatchError


Matrix = Union[List[List[float]], List[np.ndarray], np.ndarray]
Vector = Union[List[float], np.ndarray]

UNIT_TOLERANCE = 1e-4


def cosine_similarity(a: Vector, b: Vector) -> float:
    """Cosine of two unit vectors, which is their dot product."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"Vectors must have the same shape, got {a.shape} and {b.shape}"
        )
    for name, v in (("a", a), ("b", b)):
        if abs(np.linalg.norm(v) - 1.0) > UNIT_TOLERANCE:
            raise DegenerateInputError(f"{name} is not unit-norm within {UNIT_TOLERANCE}")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def cosine_similarity_matrix(X: Matrix, Y: Matrix) -> np.ndarray:
    """Row-by-row cosines between X and Y; zero rows score 0."""
    if len(X) == 0 or len(Y) == 0:
        return np.zeros((len(X), len(Y)))
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatchError(
            f"Number of columns in X and Y must be the same. X has shape {X.shape} "
            f"and Y has shape {Y.shape}."
        )
    X_norm = np.linalg.norm(X, axis=1)
    Y_norm = np.linalg.norm(Y, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        similarity = np.dot(X, Y.T) / np.outer(X_norm, Y_norm)
    similarity[np.isnan(similarity) | np.isinf(similarity)] = 0.0
    return similarity
