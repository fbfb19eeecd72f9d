"""Binary embedding files, template manifests and similarity-matrix CSVs.

Embedding file layout (all little-endian)::

    b"VPE1" | version u32 | count u64 | dim u32
    count * dim float32 values, row-major
    count label records: subject_id (u32 length + UTF-8),
                         media_id (u32 length + UTF-8), source_kind u8
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.errors import (
    DimensionMismatchError,
    LoadError,
    MalformedHeaderError,
    TrailingDataError,
    TruncatedPayloadError,
    UnknownTemplateError,
)
from src.core.types import EmbeddingDataset, SimilarityMatrix, SourceKind, Template

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

EMBEDDING_MAGIC = b"VPE1"
FORMAT_VERSION = 1
_EMBEDDING_HEADER = struct.Struct("<4sIQI")
_LENGTH = struct.Struct("<I")

MISSING_TOKEN = "MISSING"
TEMPLATE_COLUMNS = ["template_id", "subject_id", "media_id", "embedding_index"]


def _encode_label(text: str) -> bytes:
    raw = text.encode("utf-8")
    return _LENGTH.pack(len(raw)) + raw


def write_embeddings(path: PathLike, dataset: EmbeddingDataset) -> None:
    count, dim = dataset.vectors.shape
    parts = [
        _EMBEDDING_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, count, dim),
        np.ascontiguousarray(dataset.vectors, dtype="<f4").tobytes(),
    ]
    for subject, media, kind in zip(
        dataset.subject_ids, dataset.media_ids, dataset.source_kinds
    ):
        parts.append(_encode_label(subject))
        parts.append(_encode_label(media))
        parts.append(bytes([kind.value]))
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, path: PathLike):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise TruncatedPayloadError(
                f"{self.path}: truncated while reading {what} "
                f"(need {size} bytes at offset {self.offset}, file has {len(self.data)})"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def label(self, what: str) -> str:
        (length,) = _LENGTH.unpack(self.take(_LENGTH.size, what))
        try:
            return self.take(length, what).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LoadError(f"{self.path}: {what} is not valid UTF-8") from exc

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise TrailingDataError(
                f"{self.path}: {len(self.data) - self.offset} unexpected trailing bytes"
            )


def load_embeddings(path: PathLike, expected_dim: Optional[int] = None) -> EmbeddingDataset:
    data = Path(path).read_bytes()
    if len(data) < _EMBEDDING_HEADER.size:
        raise MalformedHeaderError(f"{path}: file too short for a header")
    magic, version, count, dim = _EMBEDDING_HEADER.unpack_from(data)
    if magic != EMBEDDING_MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MalformedHeaderError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise MalformedHeaderError(f"{path}: dimension must be positive")
    if expected_dim is not None and dim != expected_dim:
        raise DimensionMismatchError(
            f"{path}: header dimension {dim} differs from expected {expected_dim}"
        )

    reader = _Reader(data, path)
    reader.offset = _EMBEDDING_HEADER.size
    payload = reader.take(count * dim * 4, "vector payload")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim)

    subjects, medias, kinds = [], [], []
    for index in range(count):
        subjects.append(reader.label(f"subject_id of record {index}"))
        medias.append(reader.label(f"media_id of record {index}"))
        (kind,) = reader.take(1, f"source_kind of record {index}")
        try:
            kinds.append(SourceKind(kind))
        except ValueError as exc:
            raise LoadError(f"{path}: unknown source kind {kind} in record {index}") from exc
    reader.finish()
    logger.debug("Loaded %d embeddings of dimension %d from %s", count, dim, path)
    return EmbeddingDataset(
        vectors=vectors, subject_ids=subjects, media_ids=medias, source_kinds=kinds
    )


def write_template_manifest(path: PathLike, rows: Sequence[Tuple[str, str, str, Optional[int]]]) -> None:
    """Write ``(template_id, subject_id, media_id, embedding_index)`` rows.

    A ``None`` index marks a template that has no usable member (missing).
    """
    frame = pd.DataFrame(
        [
            [tid, sid, mid, "" if index is None else str(int(index))]
            for tid, sid, mid, index in rows
        ],
        columns=TEMPLATE_COLUMNS,
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def load_templates(path: PathLike, dataset: EmbeddingDataset) -> Dict[str, Template]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    absent = [c for c in TEMPLATE_COLUMNS if c not in frame.columns]
    if absent:
        raise LoadError(f"{path}: template manifest lacks columns {absent}")

    members: Dict[str, List[int]] = {}
    subjects: Dict[str, str] = {}
    for row in frame.itertuples(index=False):
        tid, sid = row.template_id, row.subject_id
        if subjects.setdefault(tid, sid) != sid:
            raise LoadError(f"{path}: template {tid!r} lists two subjects")
        indices = members.setdefault(tid, [])
        if row.embedding_index == "":
            continue
        try:
            index = int(row.embedding_index)
        except ValueError as exc:
            raise LoadError(f"{path}: bad embedding_index {row.embedding_index!r}") from exc
        if not 0 <= index < len(dataset):
            raise UnknownTemplateError(
                f"{path}: template {tid!r} references embedding {index} "
                f"outside a dataset of {len(dataset)}"
            )
        if dataset.media_ids[index] != row.media_id:
            raise LoadError(
                f"{path}: embedding {index} belongs to media {dataset.media_ids[index]!r}, "
                f"manifest says {row.media_id!r}"
            )
        indices.append(index)

    return {
        tid: Template(
            template_id=tid,
            subject_id=subjects[tid],
            members=tuple(dataset.embedding(i) for i in indices),
            missing=not indices,
        )
        for tid, indices in members.items()
    }


def _format_score(value: float) -> str:
    return repr(float(value))


def write_similarity_matrix(path: PathLike, matrix: SimilarityMatrix) -> None:
    cells = [
        [
            MISSING_TOKEN if matrix.missing[g, p] else _format_score(matrix.scores[g, p])
            for p in range(len(matrix.probe_ids))
        ]
        for g in range(len(matrix.gallery_ids))
    ]
    frame = pd.DataFrame(
        cells,
        index=pd.Index(matrix.gallery_ids, name="gallery_id"),
        columns=list(matrix.probe_ids),
    )
    frame.to_csv(path, lineterminator="\n")


def load_similarity_matrix(path: PathLike) -> SimilarityMatrix:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, index_col=0)
    missing = frame.to_numpy() == MISSING_TOKEN
    try:
        scores = np.where(missing, "0", frame.to_numpy()).astype(np.float64)
    except ValueError as exc:
        raise LoadError(f"{path}: similarity entries must be reals or {MISSING_TOKEN}") from exc
    return SimilarityMatrix(
        gallery_ids=list(frame.index),
        probe_ids=list(frame.columns),
        scores=scores,
        missing=missing,
    )
