"""Box motion between detector refreshes.

Predictors replace pixel-level tracking: they see the tracklet's boxes and
return its box at the requested frame.
"""
from __future__ import annotations

from typing import Dict, Mapping, Optional, Protocol, Sequence

from src.assoc.boxes import BoundingBox, overlap_ratio
from src.assoc.tracklet import Tracklet


class MotionPredictor(Protocol):
    def predict(self, tracklet: Tracklet, frame: int) -> BoundingBox: ...


class ConstantVelocityPredictor:
    """Extrapolate the last two detection-refreshed boxes; size is held."""

    def predict(self, tracklet: Tracklet, frame: int) -> BoundingBox:
        last_frame = tracklet.refreshed_frames[-1]
        last = tracklet.boxes[last_frame]
        if len(tracklet.refreshed_frames) < 2:
            return last
        prev_frame = tracklet.refreshed_frames[-2]
        prev = tracklet.boxes[prev_frame]
        span = last_frame - prev_frame
        steps = frame - last_frame
        return last.shifted(
            (last.x - prev.x) / span * steps, (last.y - prev.y) / span * steps
        )


class ReplayPredictor:
    """Follow externally tracked boxes, one list per frame.

    Each tracklet takes the supplied box that overlaps its latest box most;
    when none overlaps, ``fallback`` predicts instead.
    """

    def __init__(
        self,
        boxes_by_frame: Mapping[int, Sequence[BoundingBox]],
        fallback: Optional[MotionPredictor] = None,
    ):
        self.boxes_by_frame: Dict[int, Sequence[BoundingBox]] = dict(boxes_by_frame)
        self.fallback = fallback or ConstantVelocityPredictor()

    def predict(self, tracklet: Tracklet, frame: int) -> BoundingBox:
        candidates = self.boxes_by_frame.get(frame, ())
        reference = tracklet.latest_box
        best, best_overlap = None, 0.0
        for box in candidates:
            overlap = overlap_ratio(box, reference)
            if overlap > best_overlap:
                best, best_overlap = box, overlap
        return best if best is not None else self.fallback.predict(tracklet, frame)
