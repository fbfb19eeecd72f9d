"""Face alignment by a least-squares similarity transform on seven points."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError, DegenerateInputError, DimensionMismatchError
from src.landmarks.shapes import Shape

# Outer/inner corner of each eye, nose tip, mouth corners in the 68-point markup.
ALIGNMENT_INDICES: Tuple[int, ...] = (36, 39, 42, 45, 30, 48, 54)

NOSE_TIP = 30
LEFT_EYE = (36, 39)
RIGHT_EYE = (42, 45)

# Canonical positions of the seven points in a 100 x 100 aligned crop.
CANONICAL_SEVEN = np.array(
    [
        [30.0, 40.0],
        [42.0, 40.0],
        [58.0, 40.0],
        [70.0, 40.0],
        [50.0, 58.0],
        [36.0, 75.0],
        [64.0, 75.0],
    ]
)


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: float
    tx: float
    ty: float

    @property
    def linear(self) -> np.ndarray:
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.linear.T + self.translation

    def inverse(self) -> "SimilarityTransform":
        inverse_linear = np.linalg.inv(self.linear)
        tx, ty = -inverse_linear @ self.translation
        return SimilarityTransform(1.0 / self.scale, -self.rotation, float(tx), float(ty))

    def compose(self, first: "SimilarityTransform") -> "SimilarityTransform":
        """The transform applying ``first`` and then ``self``."""
        tx, ty = self.linear @ first.translation + self.translation
        return SimilarityTransform(
            self.scale * first.scale, self.rotation + first.rotation, float(tx), float(ty)
        )


def _as_points(points, name: str) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DimensionMismatchError(f"{name} must be an (N, 2) array, got {points.shape}")
    return points


def similarity_transform(src, dst) -> SimilarityTransform:
    """Least-squares scale, rotation and translation taking src onto dst."""
    src = _as_points(src, "src")
    dst = _as_points(dst, "dst")
    if src.shape != dst.shape:
        raise DimensionMismatchError(f"src {src.shape} and dst {dst.shape} differ in shape")
    if src.shape[0] < 2:
        raise DegenerateInputError("A similarity transform needs at least 2 points")

    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    d_src = src - mu_src
    d_dst = dst - mu_dst
    var_src = np.mean(np.sum(d_src**2, axis=1))
    if var_src <= 1e-12:
        raise DegenerateInputError("Source points coincide")

    sigma = d_dst.T @ d_src / src.shape[0]
    U, d, V_t = np.linalg.svd(sigma)
    S = np.eye(2)
    if np.linalg.det(U) * np.linalg.det(V_t) < 0:
        S[1, 1] = -1
    R = U @ S @ V_t
    scale = float(np.sum(d * S.diagonal()) / var_src)
    tx, ty = mu_dst - scale * R @ mu_src
    return SimilarityTransform(scale, float(np.arctan2(R[1, 0], R[0, 0])), float(tx), float(ty))


def align_face(
    landmarks68: Shape,
    canonical7=CANONICAL_SEVEN,
    indices: Sequence[int] = ALIGNMENT_INDICES,
) -> SimilarityTransform:
    """Transform taking the seven alignment landmarks onto canonical positions."""
    if max(indices) >= len(landmarks68) or min(indices) < 0:
        raise ConfigurationError(
            f"Alignment indices {tuple(indices)} do not fit a {len(landmarks68)}-point shape"
        )
    return similarity_transform(landmarks68.points[list(indices)], canonical7)


def normalized_mean_error(predicted: Shape, truth: Shape) -> float:
    """Mean point error over the nose-tip to mid-eye distance of ``truth``."""
    if len(predicted) != len(truth):
        raise DimensionMismatchError("Shapes differ in point count")
    points = truth.points
    mid_eye = (points[list(LEFT_EYE)].mean(axis=0) + points[list(RIGHT_EYE)].mean(axis=0)) / 2.0
    reference = np.linalg.norm(points[NOSE_TIP] - mid_eye)
    if reference <= 0:
        raise DegenerateInputError("Nose tip coincides with the eye midpoint")
    return float(np.linalg.norm(predicted.points - points, axis=1).mean() / reference)
