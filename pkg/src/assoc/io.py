from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import pandas as pd

from src.assoc.boxes import BoundingBox, Detection
from src.assoc.tracklet import Event, Tracklet
from src.core.errors import LoadError, UnknownTemplateError
from src.core.types import EmbeddingDataset

PathLike = Union[str, Path]

DETECTION_COLUMNS = ["frame", "x", "y", "width", "height", "confidence"]
APPEARANCE_COLUMN = "appearance_ref"
TRACKLET_COLUMNS = ["tracklet_id", "frame", "x", "y", "width", "height", "state"]
TRUTH_COLUMNS = ["row", "subject_id"]


def load_detections(
    path: PathLike, appearances: Optional[EmbeddingDataset] = None
) -> List[Detection]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    absent = [c for c in DETECTION_COLUMNS if c not in frame.columns]
    if absent:
        raise LoadError(f"{path}: detections file lacks columns {absent}")
    has_refs = APPEARANCE_COLUMN in frame.columns

    detections = []
    for index, row in enumerate(frame.itertuples(index=False)):
        try:
            box = BoundingBox(float(row.x), float(row.y), float(row.width), float(row.height))
            detection_frame = int(row.frame)
            confidence = float(row.confidence)
        except ValueError as exc:
            raise LoadError(f"{path}: malformed detection on row {index}: {exc}") from exc
        appearance = None
        ref = getattr(row, APPEARANCE_COLUMN) if has_refs else ""
        if ref != "":
            if appearances is None:
                raise LoadError(f"{path}: row {index} has an appearance_ref but no appearance file")
            try:
                position = int(ref)
                if position < 0:
                    raise IndexError(position)
                appearance = appearances.vectors[position]
            except (ValueError, IndexError) as exc:
                raise UnknownTemplateError(
                    f"{path}: row {index} references appearance {ref!r}"
                ) from exc
        try:
            detections.append(
                Detection(box, detection_frame, confidence, appearance=appearance, index=index)
            )
        except ValueError as exc:
            raise LoadError(f"{path}: malformed detection on row {index}: {exc}") from exc
    return detections


def write_detections(path: PathLike, detections: Sequence[Detection], refs: Optional[Sequence[Optional[int]]] = None) -> None:
    rows = [
        [d.frame, d.box.x, d.box.y, d.box.width, d.box.height, d.confidence]
        for d in detections
    ]
    columns = list(DETECTION_COLUMNS)
    if refs is not None:
        columns.append(APPEARANCE_COLUMN)
        for row, ref in zip(rows, refs):
            row.append("" if ref is None else str(ref))
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, lineterminator="\n")


def write_tracklets(path: PathLike, tracklets: Sequence[Tracklet]) -> None:
    rows = [
        [t.id, frame, box.x, box.y, box.width, box.height, t.state.value]
        for t in tracklets
        for frame, box in t.boxes.items()
    ]
    pd.DataFrame(rows, columns=TRACKLET_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def write_event_log(path: PathLike, events: Sequence[Event]) -> None:
    Path(path).write_text("".join(event.line() + "\n" for event in events), encoding="utf-8")


def write_ground_truth(path: PathLike, subjects: Sequence[str]) -> None:
    frame = pd.DataFrame({"row": range(len(subjects)), "subject_id": list(subjects)})
    frame.to_csv(path, index=False, lineterminator="\n")


def load_ground_truth(path: PathLike) -> Dict[int, str]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    absent = [c for c in TRUTH_COLUMNS if c not in frame.columns]
    if absent:
        raise LoadError(f"{path}: ground-truth file lacks columns {absent}")
    try:
        return {int(r): s for r, s in zip(frame["row"], frame["subject_id"])}
    except ValueError as exc:
        raise LoadError(f"{path}: row must be an integer") from exc


def write_identities(path: PathLike, identities: Mapping[str, str]) -> None:
    frame = pd.DataFrame(
        {"tracklet_id": list(identities), "identity": list(identities.values())}
    )
    frame.to_csv(path, index=False, lineterminator="\n")
