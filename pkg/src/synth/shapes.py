"""Synthetic landmark corpus: perturbed 68-point faces drawn as Gaussian blobs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from src.core.errors import ConfigurationError
from src.core.rng import seeded_rng
from src.landmarks.shapes import Shape, mean_shape


def _ellipse(center, radii, start: float, count: int, step: float) -> np.ndarray:
    angles = start + step * np.arange(count)
    return np.column_stack(
        [center[0] + radii[0] * np.cos(angles), center[1] + radii[1] * np.sin(angles)]
    )


def face_layout() -> np.ndarray:
    """68 points in the unit square following the usual markup order."""
    i = np.arange(17)
    jaw = np.column_stack([0.1 + 0.8 * i / 16, 0.5 + 0.4 * np.sin(np.pi * i / 16)])
    brows = np.concatenate(
        [
            np.column_stack([np.linspace(0.15, 0.4, 5), np.full(5, 0.3)]),
            np.column_stack([np.linspace(0.6, 0.85, 5), np.full(5, 0.3)]),
        ]
    )
    bridge = np.column_stack([np.full(4, 0.5), np.linspace(0.38, 0.58, 4)])
    nostrils = np.column_stack([np.linspace(0.4, 0.6, 5), np.full(5, 0.63)])
    eyes = np.concatenate(
        [
            _ellipse((0.32, 0.4), (0.08, 0.03), np.pi, 6, np.pi / 3),
            _ellipse((0.68, 0.4), (0.08, 0.03), np.pi, 6, np.pi / 3),
        ]
    )
    mouth = np.concatenate(
        [
            _ellipse((0.5, 0.75), (0.15, 0.06), np.pi, 12, np.pi / 6),
            _ellipse((0.5, 0.75), (0.1, 0.03), np.pi, 8, np.pi / 4),
        ]
    )
    return np.concatenate([jaw, brows, bridge, nostrils, eyes, mouth])


@dataclass
class ShapeCorpus:
    images: np.ndarray
    shapes: List[Shape]

    @property
    def mean_shape(self) -> Shape:
        return mean_shape(self.shapes)


def render(points: np.ndarray, image_size: int, blob_sigma: float) -> np.ndarray:
    grid = np.arange(image_size, dtype=np.float64)
    image = np.zeros((image_size, image_size))
    for x, y in points:
        image += np.outer(
            np.exp(-((grid - y) ** 2) / (2 * blob_sigma**2)),
            np.exp(-((grid - x) ** 2) / (2 * blob_sigma**2)),
        )
    return image


def gen_shape_corpus(
    count: int = 200,
    image_size: int = 64,
    seed: int = 0,
    max_rotation: float = np.deg2rad(10.0),
    point_noise: float = 0.5,
    blob_sigma: float = 1.5,
) -> ShapeCorpus:
    """Faces under random similarity perturbations plus per-point jitter."""
    if count < 1 or image_size < 16:
        raise ConfigurationError("Need at least one face and images of 16 pixels or more")
    rng = seeded_rng(seed)
    layout = face_layout() - 0.5
    images, shapes = [], []
    for _ in range(count):
        size = image_size * 0.6 * rng.uniform(0.9, 1.1)
        theta = rng.uniform(-max_rotation, max_rotation)
        c, s = np.cos(theta), np.sin(theta)
        center = image_size / 2.0 + rng.uniform(-3.0, 3.0, size=2)
        points = size * layout @ np.array([[c, -s], [s, c]]).T + center
        points = points + rng.normal(0.0, point_noise, size=points.shape)
        images.append(render(points, image_size, blob_sigma))
        shapes.append(Shape(points))
    return ShapeCorpus(images=np.array(images), shapes=shapes)
