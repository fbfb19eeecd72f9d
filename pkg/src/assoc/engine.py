"""Frame-by-frame face association.

Every frame moves the active tracklets with the motion predictor. Every
``detect_every``-th frame also runs the detector: its confidence-filtered
boxes refresh the tracklets they are assigned to, start new tracklets when
they are novel, and are otherwise discarded. A tracklet that misses more
than ``termination_frames`` consecutive detector refreshes is terminated.
"""
from __future__ import annotations

import logging
from typing import Dict, Iterable, List, Optional, Sequence

from src.assoc.boxes import Detection, is_novel, overlap_ratio
from src.assoc.config import AssocConfig
from src.assoc.linking import link_tracklets, merge_fragments
from src.assoc.motion import ConstantVelocityPredictor, MotionPredictor
from src.assoc.tracklet import Event, EventKind, Tracklet
from src.core.errors import FrameOrderError

logger = logging.getLogger(__name__)


class AssociationEngine:
    def __init__(self, cfg: AssocConfig = AssocConfig(), motion: Optional[MotionPredictor] = None):
        self.cfg = cfg
        self.motion = motion or ConstantVelocityPredictor()
        self.tracklets: List[Tracklet] = []
        self.events: List[Event] = []
        self.identities: Dict[str, str] = {}
        self.last_frame: Optional[int] = None
        self._next_id = 1

    @property
    def active(self) -> List[Tracklet]:
        return [t for t in self.tracklets if t.is_active]

    def _new_id(self) -> str:
        tracklet_id = f"T{self._next_id:04d}"
        self._next_id += 1
        return tracklet_id

    def is_detection_frame(self, frame: int) -> bool:
        return frame % self.cfg.detect_every == 0

    def advance_frame(self, frame: int, detections: Sequence[Detection] = ()) -> List[Event]:
        """Process one frame and return the events it produced."""
        if self.last_frame is not None and frame <= self.last_frame:
            raise FrameOrderError(f"Frame {frame} presented after frame {self.last_frame}")
        for detection in detections:
            if detection.frame != frame:
                raise FrameOrderError(
                    f"Detection of frame {detection.frame} presented with frame {frame}"
                )
        self.last_frame = frame

        active = self.active
        for tracklet in active:
            tracklet.put_box(frame, self.motion.predict(tracklet, frame))
        if not self.is_detection_frame(frame):
            return []

        kept = [d for d in detections if d.confidence >= self.cfg.det_confidence_min]
        result = link_tracklets(active, kept, self.cfg)
        events: List[Event] = []
        for tracklet in active:
            position = result.assignments.get(tracklet.id)
            if position is not None:
                tracklet.absorb(kept[position])
                events.append(Event(frame, EventKind.REFRESH, tracklet.id))

        # Tracklets spawned in this frame block later detections too.
        present = list(active)
        for position in result.unassigned:
            detection = kept[position]
            if is_novel(detection, present, self.cfg.overlap_threshold):
                tracklet = Tracklet.spawn(self._new_id(), detection)
                self.tracklets.append(tracklet)
                present.append(tracklet)
                events.append(Event(frame, EventKind.SPAWN, tracklet.id))
            else:
                blocker = max(present, key=lambda t: overlap_ratio(detection.box, t.latest_box))
                label = detection.index if detection.index is not None else position
                events.append(Event(frame, EventKind.DISCARD, blocker.id, str(label)))

        for tracklet in active:
            if tracklet.frames_since_detection > self.cfg.termination_frames:
                tracklet.terminate()
                events.append(Event(frame, EventKind.TERMINATE, tracklet.id))

        logger.debug(
            "Frame %d: %d detections kept, %d assigned (%d local), %d active tracklets",
            frame,
            len(kept),
            len(result.assignments),
            len(result.local),
            len(self.active),
        )
        self.events.extend(events)
        return events

    def finish(self) -> Dict[str, str]:
        """Merge fragments and return each tracklet's identity."""
        self.identities, links = merge_fragments(self.tracklets, self.cfg)
        frame = self.last_frame if self.last_frame is not None else 0
        for tail, head in links:
            self.events.append(Event(frame, EventKind.LINK, head, tail))
        logger.info(
            "Association finished: %d tracklets, %d identities, %d fragment links",
            len(self.tracklets),
            len(set(self.identities.values())),
            len(links),
        )
        return self.identities


def run_association(
    detections: Iterable[Detection],
    cfg: AssocConfig = AssocConfig(),
    motion: Optional[MotionPredictor] = None,
    last_frame: Optional[int] = None,
) -> AssociationEngine:
    """Feed every frame from 0 to ``last_frame`` (default: last detection frame)."""
    by_frame: Dict[int, List[Detection]] = {}
    for detection in detections:
        by_frame.setdefault(detection.frame, []).append(detection)
    if last_frame is None:
        last_frame = max(by_frame, default=-1)
    engine = AssociationEngine(cfg, motion)
    for frame in range(last_frame + 1):
        engine.advance_frame(frame, by_frame.get(frame, ()))
    engine.finish()
    return engine
