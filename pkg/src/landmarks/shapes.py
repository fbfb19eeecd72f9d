from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.core.errors import ConfigurationError, DimensionMismatchError


@dataclass(frozen=True, eq=False)
class Shape:
    """L landmark points as an (L, 2) array of pixel (x, y) coordinates."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64, copy=True)
        if points.ndim != 2 or points.shape[1] != 2:
            raise DimensionMismatchError(f"Shape points must be (L, 2), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ConfigurationError("Shape points must be finite")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def flat(self) -> np.ndarray:
        """(x0, y0, x1, y1, ...) of length 2L."""
        return self.points.reshape(-1)

    @classmethod
    def from_flat(cls, values: np.ndarray) -> "Shape":
        return cls(np.asarray(values, dtype=np.float64).reshape(-1, 2))

    def shifted(self, increment: np.ndarray) -> "Shape":
        increment = np.asarray(increment, dtype=np.float64)
        if increment.shape != (2 * len(self),):
            raise DimensionMismatchError(
                f"Increment of shape {increment.shape} for a {len(self)}-point shape"
            )
        return Shape.from_flat(self.flat() + increment)

    def face_size(self) -> float:
        extent = self.points.max(axis=0) - self.points.min(axis=0)
        return float(max(extent.max(), 1.0))


def mean_shape(shapes: Sequence[Shape]) -> Shape:
    if not shapes:
        raise ConfigurationError("Mean of no shapes")
    sizes = {len(s) for s in shapes}
    if len(sizes) != 1:
        raise DimensionMismatchError(f"Shapes have mixed point counts {sorted(sizes)}")
    return Shape(np.mean([s.points for s in shapes], axis=0))


def rms_point_error(predicted: Sequence[Shape], truth: Sequence[Shape]) -> float:
    """Root mean squared point distance; the quantity each cascade stage reduces."""
    squared = [np.sum((p.points - t.points) ** 2, axis=1) for p, t in zip(predicted, truth)]
    return float(np.sqrt(np.mean(squared)))
