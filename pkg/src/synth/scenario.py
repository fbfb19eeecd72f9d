"""Scripted detection scenarios for the association engine.

A script is a sequence of directives separated by newlines or ``;``::

    frames 60
    subject alice; waypoint 0 10 10 40 40; waypoint 50 110 10 40 40
    occlude 21 30; dropout 0.1; appearance 0

Boxes are linearly interpolated between waypoints; a subject produces one
detection per frame from its first to its last waypoint, except inside
occlusion windows (inclusive) and for frames lost to dropout.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.assoc.boxes import BoundingBox, Detection
from src.core.errors import ConfigurationError, ScenarioError
from src.core.rng import seeded_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Waypoint:
    frame: int
    x: float
    y: float
    width: float
    height: float


@dataclass
class SubjectScript:
    subject_id: str
    waypoints: List[Waypoint] = field(default_factory=list)
    occlusions: List[Tuple[int, int]] = field(default_factory=list)
    dropout: float = 0.0
    appearance: Optional[int] = None

    @property
    def span(self) -> Tuple[int, int]:
        return self.waypoints[0].frame, self.waypoints[-1].frame

    def box_at(self, frame: int) -> Optional[BoundingBox]:
        """Interpolated box, or None outside the scripted span."""
        first, last = self.span
        if not first <= frame <= last:
            return None
        frames = [w.frame for w in self.waypoints]
        values = np.array([[w.x, w.y, w.width, w.height] for w in self.waypoints])
        x, y, width, height = (np.interp(frame, frames, values[:, k]) for k in range(4))
        return BoundingBox(x, y, width, height)

    def occluded(self, frame: int) -> bool:
        return any(a <= frame <= b for a, b in self.occlusions)


@dataclass
class Scenario:
    subjects: List[SubjectScript]
    frames: Optional[int] = None

    @property
    def last_frame(self) -> int:
        if self.frames is not None:
            return self.frames - 1
        return max((s.span[1] for s in self.subjects), default=-1)


@dataclass(frozen=True)
class ScenarioOptions:
    confidence: float = 1.0
    confidence_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.confidence_noise < 0:
            raise ConfigurationError("confidence_noise must be non-negative")


def _numbers(args: List[str], count: int, directive: str, line: int) -> List[float]:
    if len(args) != count:
        raise ScenarioError(f"line {line}: {directive} takes {count} values, got {len(args)}")
    try:
        return [float(a) for a in args]
    except ValueError as exc:
        raise ScenarioError(f"line {line}: {directive} values must be numbers") from exc


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario(subjects=[])
    current: Optional[SubjectScript] = None
    for number, raw in enumerate(text.splitlines(), start=1):
        for statement in raw.split("#", 1)[0].split(";"):
            words = statement.split()
            if not words:
                continue
            directive, args = words[0], words[1:]
            if directive == "frames":
                (count,) = _numbers(args, 1, directive, number)
                scenario.frames = int(count)
            elif directive == "subject":
                if len(args) != 1:
                    raise ScenarioError(f"line {number}: subject takes one id")
                if any(s.subject_id == args[0] for s in scenario.subjects):
                    raise ScenarioError(f"line {number}: subject {args[0]!r} declared twice")
                current = SubjectScript(args[0])
                scenario.subjects.append(current)
            elif current is None:
                raise ScenarioError(f"line {number}: {directive} before any subject")
            elif directive == "waypoint":
                f, x, y, w, h = _numbers(args, 5, directive, number)
                if current.waypoints and f <= current.waypoints[-1].frame:
                    raise ScenarioError(f"line {number}: waypoint frames must increase")
                if w <= 0 or h <= 0:
                    raise ScenarioError(f"line {number}: waypoint box must have positive size")
                current.waypoints.append(Waypoint(int(f), x, y, w, h))
            elif directive == "occlude":
                a, b = _numbers(args, 2, directive, number)
                if b < a:
                    raise ScenarioError(f"line {number}: occlusion ends before it starts")
                current.occlusions.append((int(a), int(b)))
            elif directive == "dropout":
                (rate,) = _numbers(args, 1, directive, number)
                if not 0.0 <= rate <= 1.0:
                    raise ScenarioError(f"line {number}: dropout must lie in [0, 1]")
                current.dropout = rate
            elif directive == "appearance":
                (ref,) = _numbers(args, 1, directive, number)
                current.appearance = int(ref)
            else:
                raise ScenarioError(f"line {number}: unknown directive {directive!r}")
    for subject in scenario.subjects:
        if not subject.waypoints:
            raise ScenarioError(f"subject {subject.subject_id!r} has no waypoints")
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _check_ambiguity(scenario: Scenario) -> None:
    for a, b in itertools.combinations(scenario.subjects, 2):
        first = max(a.span[0], b.span[0])
        last = min(a.span[1], b.span[1])
        for frame in range(first, last + 1):
            if a.box_at(frame) == b.box_at(frame):
                raise ScenarioError(
                    f"subjects {a.subject_id!r} and {b.subject_id!r} share the box at frame {frame}"
                )


@dataclass
class GeneratedScenario:
    detections: List[Detection]
    truth: List[str]
    appearance_refs: List[Optional[int]]


def gen_tracking_scenario(
    scenario: Scenario, options: ScenarioOptions = ScenarioOptions()
) -> GeneratedScenario:
    """Detections in frame order with the true subject of every row."""
    _check_ambiguity(scenario)
    rng = seeded_rng(options.seed)
    out = GeneratedScenario([], [], [])
    for frame in range(scenario.last_frame + 1):
        for subject in scenario.subjects:
            box = subject.box_at(frame)
            if box is None or subject.occluded(frame):
                continue
            if subject.dropout > 0.0 and rng.random() < subject.dropout:
                continue
            confidence = options.confidence
            if options.confidence_noise > 0.0:
                confidence += float(rng.normal(0.0, options.confidence_noise))
            out.detections.append(Detection(box, frame, confidence, index=len(out.detections)))
            out.truth.append(subject.subject_id)
            out.appearance_refs.append(subject.appearance)
    if not out.detections:
        logger.warning("Scenario produced no detections")
    return out
