from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from src.core.errors import MalformedHeaderError, TrailingDataError, TruncatedPayloadError
from src.core.types import EmbeddingMatrix
from src.embedding.training import LogRow

PathLike = Union[str, Path]

MATRIX_MAGIC = b"VPW1"
MATRIX_VERSION = 1
_MATRIX_HEADER = struct.Struct("<4sIII")


def write_matrix(path: PathLike, W: EmbeddingMatrix) -> None:
    header = _MATRIX_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, W.rows, W.cols)
    body = np.ascontiguousarray(W.entries, dtype="<f4").tobytes()
    Path(path).write_bytes(header + body)


def load_matrix(path: PathLike) -> EmbeddingMatrix:
    data = Path(path).read_bytes()
    if len(data) < _MATRIX_HEADER.size:
        raise MalformedHeaderError(f"{path}: file too short for a header")
    magic, version, rows, cols = _MATRIX_HEADER.unpack_from(data)
    if magic != MATRIX_MAGIC or version != MATRIX_VERSION:
        raise MalformedHeaderError(f"{path}: not a version {MATRIX_VERSION} matrix file")
    expected = _MATRIX_HEADER.size + rows * cols * 4
    if len(data) < expected:
        raise TruncatedPayloadError(f"{path}: expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise TrailingDataError(f"{path}: {len(data) - expected} trailing bytes")
    entries = np.frombuffer(data, dtype="<f4", offset=_MATRIX_HEADER.size)
    return EmbeddingMatrix(entries.reshape(rows, cols).astype(np.float64))


def write_training_log(path: PathLike, rows: Sequence[LogRow]) -> None:
    frame = pd.DataFrame(list(rows), columns=["iteration", "loss_ema", "active_fraction"])
    frame.to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
