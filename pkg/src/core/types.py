from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError, DimensionMismatchError


class SourceKind(Enum):
    IMAGE = 0
    VIDEO_FRAME = 1


class Objective(Enum):
    TSE = "tse"
    TDE = "tde"


def _frozen_array(values, dtype=np.float64, ndim: int = 1) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    if array.ndim != ndim:
        raise DimensionMismatchError(
            f"Expected a {ndim}-dimensional array, got shape {array.shape}"
        )
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Embedding:
    values: np.ndarray
    subject_id: str
    media_id: str
    source_kind: SourceKind = SourceKind.IMAGE

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class EmbeddingDataset:
    """A count x dim block of vectors with one label record per row."""

    vectors: np.ndarray
    subject_ids: Tuple[str, ...]
    media_ids: Tuple[str, ...]
    source_kinds: Tuple[SourceKind, ...]

    def __post_init__(self):
        vectors = np.array(self.vectors, copy=True)
        if vectors.ndim != 2:
            raise DimensionMismatchError(
                f"Dataset vectors must be 2-dimensional, got shape {vectors.shape}"
            )
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))
        object.__setattr__(self, "media_ids", tuple(str(m) for m in self.media_ids))
        object.__setattr__(self, "source_kinds", tuple(self.source_kinds))
        count = vectors.shape[0]
        for name in ("subject_ids", "media_ids", "source_kinds"):
            if len(getattr(self, name)) != count:
                raise DimensionMismatchError(
                    f"{name} has {len(getattr(self, name))} entries for {count} vectors"
                )

    @classmethod
    def from_embeddings(cls, embeddings: Sequence[Embedding]) -> "EmbeddingDataset":
        if not embeddings:
            raise ConfigurationError("Cannot build a dataset from no embeddings")
        dims = {e.dim for e in embeddings}
        if len(dims) != 1:
            raise DimensionMismatchError(f"Embeddings have mixed dimensions {sorted(dims)}")
        return cls(
            vectors=np.stack([e.values for e in embeddings]),
            subject_ids=[e.subject_id for e in embeddings],
            media_ids=[e.media_id for e in embeddings],
            source_kinds=[e.source_kind for e in embeddings],
        )

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def embedding(self, index: int) -> Embedding:
        return Embedding(
            values=self.vectors[index],
            subject_id=self.subject_ids[index],
            media_id=self.media_ids[index],
            source_kind=self.source_kinds[index],
        )

    def indices_by_subject(self) -> Dict[str, List[int]]:
        groups: Dict[str, List[int]] = {}
        for index, subject in enumerate(self.subject_ids):
            groups.setdefault(subject, []).append(index)
        return groups

    def subset(self, indices: Iterable[int]) -> "EmbeddingDataset":
        indices = list(indices)
        return EmbeddingDataset(
            vectors=self.vectors[indices],
            subject_ids=[self.subject_ids[i] for i in indices],
            media_ids=[self.media_ids[i] for i in indices],
            source_kinds=[self.source_kinds[i] for i in indices],
        )


@dataclass(frozen=True, eq=False)
class Template:
    template_id: str
    subject_id: str
    members: Tuple[Embedding, ...] = ()
    missing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members and not self.missing:
            raise ConfigurationError(
                f"Template {self.template_id!r} has no members and is not flagged missing"
            )
        for member in self.members:
            if member.subject_id != self.subject_id:
                raise ConfigurationError(
                    f"Template {self.template_id!r} of subject {self.subject_id!r} "
                    f"holds an embedding of subject {member.subject_id!r}"
                )


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """The n x M linear projection W."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen_array(self.entries, ndim=2)
        if not np.all(np.isfinite(entries)):
            raise ConfigurationError("Embedding matrix entries must be finite")
        object.__setattr__(self, "entries", entries)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class Triplet:
    anchor: Embedding
    positive: Embedding
    negative: Embedding

    def __post_init__(self):
        if self.anchor.subject_id != self.positive.subject_id:
            raise ConfigurationError("Anchor and positive must share a subject")
        if self.anchor.subject_id == self.negative.subject_id:
            raise ConfigurationError("Anchor and negative must differ in subject")


@dataclass(frozen=True)
class TrainConfig:
    output_dim: int = 128
    margin: float = 0.1
    # The source quotes both 0.01 and 0.02; 0.01 is the default.
    learning_rate: float = 0.01
    negatives_pool: int = 1000
    iterations: int = 5000
    seed: int = 0
    log_every: int = 100
    ema_decay: float = 0.98

    def __post_init__(self):
        if self.output_dim <= 0:
            raise ConfigurationError("output_dim must be positive")
        if self.margin <= 0:
            raise ConfigurationError("margin must be positive")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.negatives_pool <= 0:
            raise ConfigurationError("negatives_pool must be positive")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be non-negative")
        if self.seed < 0:
            raise ConfigurationError("seed must be unsigned")
        if self.log_every <= 0:
            raise ConfigurationError("log_every must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigurationError("ema_decay must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Gallery x probe scores; entries under ``missing`` are MISSING.

    MISSING compares below every finite score. The stored score under a
    MISSING entry is 0.0 and carries no meaning.
    """

    gallery_ids: Tuple[str, ...]
    probe_ids: Tuple[str, ...]
    scores: np.ndarray
    missing: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "gallery_ids", tuple(str(g) for g in self.gallery_ids))
        object.__setattr__(self, "probe_ids", tuple(str(p) for p in self.probe_ids))
        shape = (len(self.gallery_ids), len(self.probe_ids))
        scores = np.array(self.scores, dtype=np.float64, copy=True).reshape(shape)
        if self.missing is None:
            missing = np.zeros(shape, dtype=bool)
        else:
            missing = np.array(self.missing, dtype=bool, copy=True)
        if missing.shape != shape:
            raise DimensionMismatchError(
                f"Missing mask shape {missing.shape} does not match {shape}"
            )
        scores[missing] = 0.0
        if not np.all(np.isfinite(scores)):
            raise ConfigurationError("Similarity scores must be finite or MISSING")
        scores.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "missing", missing)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.scores.shape

    def ordered_scores(self) -> np.ndarray:
        """Scores with MISSING mapped to -inf, for ordering only."""
        return np.where(self.missing, -np.inf, self.scores)

    def same_order(self, other: "SimilarityMatrix") -> bool:
        return (
            self.gallery_ids == other.gallery_ids and self.probe_ids == other.probe_ids
        )
