"""Shape CSVs, shape corpora and the binary cascade model.

Model file layout (little-endian)::

    b"VPL1" | version u32 | stage count u32
    per stage: patch_scale f32 | rows u32 | cols u32 | rows * cols f32
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.errors import LoadError, MalformedHeaderError, TrailingDataError, TruncatedPayloadError
from src.landmarks.cascade import StageRegressor
from src.landmarks.features import PixelDifferenceFeatures
from src.landmarks.shapes import Shape

PathLike = Union[str, Path]

MODEL_MAGIC = b"VPL1"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sII")
_STAGE_HEADER = struct.Struct("<fII")

SHAPE_COLUMNS = ["point_index", "x", "y"]
CORPUS_COLUMNS = ["face_index", "point_index", "x", "y"]
FEATURE_KEYS = ("landmarks", "pairs_per_point", "seed")


def write_shape(path: PathLike, shape: Shape) -> None:
    frame = pd.DataFrame(
        {"point_index": range(len(shape)), "x": shape.points[:, 0], "y": shape.points[:, 1]}
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def load_shape(path: PathLike) -> Shape:
    frame = pd.read_csv(path)
    absent = [c for c in SHAPE_COLUMNS if c not in frame.columns]
    if absent:
        raise LoadError(f"{path}: shape file lacks columns {absent}")
    frame = frame.sort_values("point_index")
    if list(frame["point_index"]) != list(range(len(frame))):
        raise LoadError(f"{path}: point indices must run 0..L-1")
    return Shape(frame[["x", "y"]].to_numpy(dtype=np.float64))


def write_shape_corpus(path: PathLike, shapes: Sequence[Shape]) -> None:
    rows = [
        (face, point, x, y)
        for face, shape in enumerate(shapes)
        for point, (x, y) in enumerate(shape.points)
    ]
    pd.DataFrame(rows, columns=CORPUS_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def load_shape_corpus(path: PathLike) -> List[Shape]:
    frame = pd.read_csv(path)
    absent = [c for c in CORPUS_COLUMNS if c not in frame.columns]
    if absent:
        raise LoadError(f"{path}: shape corpus lacks columns {absent}")
    shapes = []
    for _, rows in frame.groupby("face_index", sort=True):
        rows = rows.sort_values("point_index")
        shapes.append(Shape(rows[["x", "y"]].to_numpy(dtype=np.float64)))
    return shapes


def write_images(path: PathLike, images: np.ndarray) -> None:
    with open(path, "wb") as handle:
        np.save(handle, np.asarray(images, dtype=np.float64), allow_pickle=False)


def load_images(path: PathLike) -> np.ndarray:
    try:
        images = np.load(path, allow_pickle=False)
    except ValueError as exc:
        raise LoadError(f"{path}: not an image array file") from exc
    if images.ndim != 3:
        raise LoadError(f"{path}: expected an (N, H, W) array, got shape {images.shape}")
    return images


def write_cascade(path: PathLike, stages: Sequence[StageRegressor]) -> None:
    parts = [_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, len(stages))]
    for stage in stages:
        rows, cols = stage.weights.shape
        parts.append(_STAGE_HEADER.pack(stage.patch_scale, rows, cols))
        parts.append(np.ascontiguousarray(stage.weights, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_cascade(path: PathLike) -> List[StageRegressor]:
    data = Path(path).read_bytes()
    if len(data) < _MODEL_HEADER.size:
        raise MalformedHeaderError(f"{path}: file too short for a header")
    magic, version, count = _MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC or version != MODEL_VERSION:
        raise MalformedHeaderError(f"{path}: not a version {MODEL_VERSION} cascade file")
    offset = _MODEL_HEADER.size
    stages = []
    for index in range(1, count + 1):
        if offset + _STAGE_HEADER.size > len(data):
            raise TruncatedPayloadError(f"{path}: truncated header of stage {index}")
        scale, rows, cols = _STAGE_HEADER.unpack_from(data, offset)
        offset += _STAGE_HEADER.size
        size = rows * cols * 4
        if offset + size > len(data):
            raise TruncatedPayloadError(f"{path}: truncated weights of stage {index}")
        weights = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset)
        offset += size
        stages.append(StageRegressor(index, weights.reshape(rows, cols).astype(np.float64), float(scale)))
    if offset != len(data):
        raise TrailingDataError(f"{path}: {len(data) - offset} trailing bytes")
    return stages


def feature_layout(stages: Sequence[StageRegressor]) -> Tuple[int, int]:
    """(landmarks, pairs_per_point) implied by a pixel-difference cascade."""
    if not stages:
        raise LoadError("Cascade has no stages")
    rows, cols = stages[0].weights.shape
    landmarks = rows // 2
    pairs, rest = divmod(cols - 1, landmarks)
    if rows % 2 or rest:
        raise LoadError(f"Stage weights {rows}x{cols} do not fit a pixel-difference cascade")
    return landmarks, pairs


def write_features(path: PathLike, phi: PixelDifferenceFeatures) -> None:
    """Record what rebuilds ``phi``: its landmark count, pairs and offset seed."""
    settings = {"landmarks": phi.landmarks, "pairs_per_point": phi.pairs_per_point, "seed": phi.seed}
    Path(path).write_text(json.dumps(settings, indent=2) + "\n", encoding="utf-8")


def load_features(path: PathLike, stages: Sequence[StageRegressor]) -> PixelDifferenceFeatures:
    """Rebuild the features a cascade was trained with and check they fit it."""
    try:
        settings = json.loads(Path(path).read_text(encoding="utf-8"))
        landmarks, pairs, seed = (int(settings[key]) for key in FEATURE_KEYS)
    except (ValueError, KeyError, TypeError) as exc:
        raise LoadError(f"{path}: not a feature settings file") from exc
    if (landmarks, pairs) != feature_layout(stages):
        raise LoadError(
            f"{path}: features for {landmarks} landmarks x {pairs} pairs do not fit the cascade"
        )
    return PixelDifferenceFeatures(landmarks, pairs, seed)
