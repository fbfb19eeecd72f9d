from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from src.assoc.boxes import BoundingBox, Detection
from src.core.errors import FrameOrderError


class TrackletState(Enum):
    ACTIVE = "active"
    TERMINATED = "terminated"


class EventKind(Enum):
    SPAWN = "spawn"
    REFRESH = "refresh"
    TERMINATE = "terminate"
    LINK = "link"
    DISCARD = "discard"


@dataclass(frozen=True)
class Event:
    frame: int
    kind: EventKind
    tracklet_id: str
    detail: str = ""

    def line(self) -> str:
        head = f"{self.frame},event,{self.kind.value},{self.tracklet_id}"
        return f"{head},{self.detail}" if self.detail else head


@dataclass
class Tracklet:
    """Boxes of one hypothesised face, one per frame, frames increasing.

    ``refreshed_frames`` lists the frames whose box came from a detection;
    the other boxes were produced by the motion predictor.
    """

    id: str
    boxes: Dict[int, BoundingBox] = field(default_factory=dict)
    confidence: float = 1.0
    frames_since_detection: int = 0
    state: TrackletState = TrackletState.ACTIVE
    matched: int = 0
    opportunities: int = 0
    refreshed_frames: List[int] = field(default_factory=list)
    appearance: Optional[np.ndarray] = None
    initial_appearance: Optional[np.ndarray] = None
    detection_indices: List[int] = field(default_factory=list)
    # frame of each entry in detection_indices
    detection_frames: List[int] = field(default_factory=list)

    @classmethod
    def spawn(cls, tracklet_id: str, detection: Detection) -> "Tracklet":
        tracklet = cls(id=tracklet_id)
        tracklet.absorb(detection)
        tracklet.matched = 1
        tracklet.opportunities = 1
        return tracklet

    @property
    def is_active(self) -> bool:
        return self.state is TrackletState.ACTIVE

    @property
    def first_frame(self) -> int:
        return next(iter(self.boxes))

    @property
    def last_frame(self) -> int:
        return next(reversed(self.boxes))

    @property
    def latest_box(self) -> BoundingBox:
        return self.boxes[self.last_frame]

    def put_box(self, frame: int, box: BoundingBox) -> None:
        if self.boxes and frame < self.last_frame:
            raise FrameOrderError(
                f"Tracklet {self.id}: box for frame {frame} after frame {self.last_frame}"
            )
        self.boxes[frame] = box

    def absorb(self, detection: Detection) -> None:
        """Make ``detection`` the tracklet's box at its frame."""
        self.put_box(detection.frame, detection.box)
        if not self.refreshed_frames or self.refreshed_frames[-1] != detection.frame:
            self.refreshed_frames.append(detection.frame)
        if detection.appearance is not None:
            self.appearance = detection.appearance
            if self.initial_appearance is None:
                self.initial_appearance = detection.appearance
        if detection.index is not None:
            self.detection_indices.append(detection.index)
            self.detection_frames.append(detection.frame)

    def record_opportunity(self, matched: bool, decay: float) -> None:
        self.opportunities += 1
        if matched:
            self.matched += 1
            self.frames_since_detection = 0
        else:
            self.frames_since_detection += 1
        self.confidence = (self.matched / self.opportunities) * decay**self.frames_since_detection

    def terminate(self) -> None:
        """Stop the tracklet and drop its trailing predicted-only boxes."""
        self.state = TrackletState.TERMINATED
        last = self.refreshed_frames[-1]
        for frame in [f for f in self.boxes if f > last]:
            del self.boxes[frame]
