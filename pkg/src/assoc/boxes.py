from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from src.core.errors import DegenerateInputError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixels, (x, y) is the top-left corner."""

    x: float
    y: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("x", "y", "width", "height"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise DegenerateInputError(f"Box {name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.width <= 0 or self.height <= 0:
            raise DegenerateInputError(
                f"Box must have positive size, got {self.width} x {self.height}"
            )

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def x2(self) -> float:
        return self.x + self.width

    @property
    def y2(self) -> float:
        return self.y + self.height

    def intersection_area(self, other: "BoundingBox") -> float:
        w = min(self.x2, other.x2) - max(self.x, other.x)
        h = min(self.y2, other.y2) - max(self.y, other.y)
        if w <= 0 or h <= 0:
            return 0.0
        return w * h

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.width, self.height)


@dataclass(frozen=True, eq=False)
class Detection:
    box: BoundingBox
    frame: int
    confidence: float = 1.0
    appearance: Optional[np.ndarray] = None
    # Row of the detection in its source file, used to join ground truth.
    index: Optional[int] = None

    def __post_init__(self):
        if self.frame < 0:
            raise DegenerateInputError(f"Frame must be non-negative, got {self.frame}")
        if self.appearance is not None:
            appearance = np.array(self.appearance, dtype=np.float64, copy=True)
            appearance.setflags(write=False)
            object.__setattr__(self, "appearance", appearance)


def overlap_ratio(b_d: BoundingBox, b_tr: BoundingBox) -> float:
    """area(b_d & b_tr) / area(b_tr); not symmetric."""
    if b_tr.area <= 0:
        raise DegenerateInputError("Tracked box has zero area")
    return min(1.0, b_d.intersection_area(b_tr) / b_tr.area)


def max_overlap(box: BoundingBox, tracked: Iterable[BoundingBox]) -> float:
    return max((overlap_ratio(box, b) for b in tracked), default=0.0)


def is_novel(d: Detection, active, gamma: float) -> bool:
    """True when no active tracklet's latest box overlaps ``d`` by more than gamma."""
    return max_overlap(d.box, (t.latest_box for t in active)) <= gamma
