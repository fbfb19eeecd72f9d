"""Shape-indexed features for the regression cascade."""
from __future__ import annotations

from typing import Protocol

import numpy as np
from scipy.ndimage import map_coordinates

from src.core.errors import DimensionMismatchError
from src.core.rng import seeded_rng
from src.embedding.normalize import STD_FLOOR
from src.landmarks.shapes import Shape


class FeatureFunction(Protocol):
    length: int

    def __call__(self, image: np.ndarray, shape: Shape, patch_scale: float) -> np.ndarray: ...


class PixelDifferenceFeatures:
    """Intensity differences between pixel pairs placed around each landmark.

    Pair offsets are fixed at construction, in units of the face size, and
    scaled by the stage's patch scale. The difference vector is z-scored and
    a constant 1.0 is appended as bias.
    """

    def __init__(self, landmarks: int, pairs_per_point: int = 8, seed: int = 0):
        if landmarks <= 0 or pairs_per_point <= 0:
            raise DimensionMismatchError("landmarks and pairs_per_point must be positive")
        self.landmarks = landmarks
        self.pairs_per_point = pairs_per_point
        self.seed = seed
        rng = seeded_rng(seed)
        self.offsets = rng.uniform(-0.5, 0.5, size=(landmarks, pairs_per_point, 2, 2))

    @property
    def length(self) -> int:
        return self.landmarks * self.pairs_per_point + 1

    def __call__(self, image: np.ndarray, shape: Shape, patch_scale: float) -> np.ndarray:
        if len(shape) != self.landmarks:
            raise DimensionMismatchError(
                f"Features built for {self.landmarks} landmarks, shape has {len(shape)}"
            )
        image = np.asarray(image, dtype=np.float64)
        radius = patch_scale * shape.face_size()
        # (L, P, 2 ends, xy)
        positions = shape.points[:, None, None, :] + radius * self.offsets
        xs = positions[..., 0].ravel()
        ys = positions[..., 1].ravel()
        samples = map_coordinates(image, [ys, xs], order=1, mode="nearest")
        samples = samples.reshape(self.landmarks, self.pairs_per_point, 2)
        diffs = (samples[..., 0] - samples[..., 1]).ravel()
        diffs = (diffs - diffs.mean()) / max(diffs.std(), STD_FLOOR)
        return np.append(diffs, 1.0)
