"""Labelled embedding clusters and evaluation protocols.

Subject means lie on the unit sphere of a random ``intrinsic_dim``
subspace; members are means plus isotropic noise, unit-normalized.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.core.errors import ConfigurationError
from src.core.rng import seeded_rng
from src.core.types import EmbeddingDataset, SourceKind
from src.embedding.normalize import l2_normalize, l2_normalize_rows
from src.evaluation.protocol import EvalMode, Protocol, Split

logger = logging.getLogger(__name__)

TemplateRow = Tuple[str, str, str, Optional[int]]


@dataclass(frozen=True)
class ClusterSpec:
    subjects: int = 20
    per_subject: int = 40
    ambient_dim: int = 64
    intrinsic_dim: int = 8
    noise_sigma: float = 0.25
    media_per_subject: int = 4
    seed: int = 0
    templates_per_subject: int = 2
    # Adds one video medium of this many near-duplicate frames to every template.
    video_frames: int = 0
    # Pairs subjects (0, 1), (2, 3), ... on opposite means.
    antipodal: bool = False

    def __post_init__(self):
        if self.subjects < 1 or self.per_subject < 1:
            raise ConfigurationError("subjects and per_subject must be positive")
        if not 1 <= self.intrinsic_dim <= self.ambient_dim:
            raise ConfigurationError("intrinsic_dim must lie in [1, ambient_dim]")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")
        if not 1 <= self.media_per_subject <= self.per_subject:
            raise ConfigurationError("media_per_subject must lie in [1, per_subject]")
        if not 1 <= self.templates_per_subject <= self.media_per_subject:
            raise ConfigurationError("templates_per_subject must lie in [1, media_per_subject]")
        if self.video_frames < 0:
            raise ConfigurationError("video_frames must be non-negative")


def subject_id(index: int) -> str:
    return f"s{index:03d}"


def _subject_means(spec: ClusterSpec, rng: np.random.Generator) -> np.ndarray:
    basis, _ = np.linalg.qr(rng.standard_normal((spec.ambient_dim, spec.intrinsic_dim)))
    means = []
    for index in range(spec.subjects):
        if spec.antipodal and index % 2 == 1:
            means.append(-means[-1])
            continue
        means.append(basis @ l2_normalize(rng.standard_normal(spec.intrinsic_dim)))
    return np.array(means)


def gen_clusters(spec: ClusterSpec) -> Tuple[EmbeddingDataset, List[TemplateRow]]:
    """Embeddings plus ``(template_id, subject_id, media_id, index)`` manifest rows."""
    rng = seeded_rng(spec.seed)
    means = _subject_means(spec, rng)
    scale = spec.noise_sigma / np.sqrt(spec.ambient_dim)

    vectors: List[np.ndarray] = []
    subjects: List[str] = []
    medias: List[str] = []
    kinds: List[SourceKind] = []
    rows: List[TemplateRow] = []

    def add(vector: np.ndarray, sid: str, tid: str, mid: str, kind: SourceKind) -> None:
        rows.append((tid, sid, mid, len(vectors)))
        vectors.append(vector)
        subjects.append(sid)
        medias.append(mid)
        kinds.append(kind)

    for index, mean in enumerate(means):
        sid = subject_id(index)
        members = l2_normalize_rows(mean + rng.normal(0.0, scale, size=(spec.per_subject, spec.ambient_dim)))
        for media in range(spec.media_per_subject):
            tid = f"{sid}_t{media % spec.templates_per_subject}"
            for member in members[media :: spec.media_per_subject]:
                add(member, sid, tid, f"{sid}_m{media}", SourceKind.IMAGE)
        if spec.video_frames:
            for template in range(spec.templates_per_subject):
                tid = f"{sid}_t{template}"
                base = mean + rng.normal(0.0, scale, size=spec.ambient_dim)
                jitter = rng.normal(0.0, scale / 10.0, size=(spec.video_frames, spec.ambient_dim))
                for frame in l2_normalize_rows(base + jitter):
                    add(frame, sid, tid, f"{sid}_v{template}", SourceKind.VIDEO_FRAME)

    rows.sort(key=lambda row: (row[0], row[3]))
    dataset = EmbeddingDataset(
        vectors=np.array(vectors), subject_ids=subjects, media_ids=medias, source_kinds=kinds
    )
    logger.info(
        "Generated %d embeddings of %d subjects in %d templates",
        len(dataset),
        spec.subjects,
        len({row[0] for row in rows}),
    )
    return dataset, rows


def template_subjects(rows: List[TemplateRow]) -> Dict[str, str]:
    return {tid: sid for tid, sid, _, _ in rows}


def gen_protocol(
    templates: Mapping[str, str],
    splits: int = 10,
    train_fraction: float = 2.0 / 3.0,
    impostor_fraction: float = 0.2,
    seed: int = 0,
) -> Protocol:
    """Subject-disjoint random splits over ``template_id -> subject_id``.

    Each enrolled test subject contributes its first template to the
    gallery and the rest as probes; a fraction of test subjects is left
    unenrolled so that all their templates are impostor probes.
    """
    if splits < 1:
        raise ConfigurationError("Need at least one split")
    if not 0.0 < train_fraction < 1.0 or not 0.0 <= impostor_fraction < 1.0:
        raise ConfigurationError("train_fraction must lie in (0, 1), impostor_fraction in [0, 1)")
    by_subject: Dict[str, List[str]] = {}
    for tid in sorted(templates):
        by_subject.setdefault(templates[tid], []).append(tid)
    subjects = sorted(by_subject)
    n_train = int(round(train_fraction * len(subjects)))
    if n_train < 2 or len(subjects) - n_train < 2:
        raise ConfigurationError(f"{len(subjects)} subjects are too few for train/test splits")

    rng = seeded_rng(seed)
    result = []
    for index in range(splits):
        order = [subjects[i] for i in rng.permutation(len(subjects))]
        train, test = sorted(order[:n_train]), sorted(order[n_train:])
        n_impostor = int(round(impostor_fraction * len(test)))
        impostors, enrolled = test[:n_impostor], test[n_impostor:]
        result.append(
            Split(
                index=index,
                train=tuple(t for s in train for t in by_subject[s]),
                gallery=tuple(by_subject[s][0] for s in enrolled),
                probe=tuple(t for s in enrolled for t in by_subject[s][1:])
                + tuple(t for s in impostors for t in by_subject[s]),
            )
        )
    mode = EvalMode.OPEN_SET if impostor_fraction > 0 else EvalMode.VERIFICATION
    return Protocol(splits=tuple(result), mode=mode)
