"""Verification and identification metrics.

MISSING scores rank below every finite score: they are never accepted at a
finite threshold and sort after every finite gallery entry.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError, MetricUnavailableError
from src.core.types import SimilarityMatrix

ScoredPair = Tuple[Optional[float], bool]


@dataclass(frozen=True)
class RocPoint:
    far: float
    tar: float
    threshold: float


def _accepted_counts(sorted_values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """How many of ``sorted_values`` are >= each threshold."""
    return sorted_values.size - np.searchsorted(sorted_values, thresholds, side="left")


def roc_from_arrays(
    values: np.ndarray, genuine: np.ndarray, missing: Optional[np.ndarray] = None
) -> List[RocPoint]:
    values = np.asarray(values, dtype=np.float64).ravel()
    genuine = np.asarray(genuine, dtype=bool).ravel()
    missing = (
        np.zeros(values.shape, dtype=bool)
        if missing is None
        else np.asarray(missing, dtype=bool).ravel()
    )
    positives = int(genuine.sum())
    negatives = int((~genuine).sum())
    if positives == 0 or negatives == 0:
        raise MetricUnavailableError(
            f"ROC needs positive and negative pairs, got {positives} and {negatives}"
        )
    finite = ~missing
    if not np.all(np.isfinite(values[finite])):
        raise ConfigurationError("Scores must be finite or MISSING")

    thresholds = np.unique(values[finite])[::-1]
    pos = np.sort(values[finite & genuine])
    neg = np.sort(values[finite & ~genuine])
    tar = _accepted_counts(pos, thresholds) / positives
    far = _accepted_counts(neg, thresholds) / negatives
    return [
        RocPoint(far=float(f), tar=float(t), threshold=float(th))
        for f, t, th in zip(far, tar, thresholds)
    ]


def roc_curve(scores: Iterable[ScoredPair]) -> List[RocPoint]:
    """ROC over every distinct finite threshold, highest threshold first.

    ``scores`` holds ``(score, same_subject)`` pairs; a ``None`` score is
    MISSING.
    """
    scores = list(scores)
    missing = np.array([s is None for s, _ in scores], dtype=bool)
    values = np.array([0.0 if s is None else s for s, _ in scores], dtype=np.float64)
    genuine = np.array([bool(same) for _, same in scores], dtype=bool)
    return roc_from_arrays(values, genuine, missing)


def tar_at_far(curve: Sequence[RocPoint], far_target: float) -> float:
    """Best TAR among operating points whose FAR does not exceed the target."""
    eligible = [point.tar for point in curve if point.far <= far_target]
    return max(eligible, default=0.0)


def equal_error_rate(curve: Sequence[RocPoint]) -> float:
    """Mean of FAR and FRR at the operating point where they are closest."""
    points = [(0.0, 0.0)] + [(p.far, p.tar) for p in curve]
    far, tar = min(points, key=lambda ft: abs(ft[0] - (1.0 - ft[1])))
    return (far + (1.0 - tar)) / 2.0


def _mate_positions(
    ordered: np.ndarray, gallery_subjects: np.ndarray, probe_subjects: Sequence[str]
) -> List[Optional[int]]:
    """0-based position of each probe's best mate in its stable ranking.

    Ranking is by score descending, then gallery index; MISSING entries
    (-inf here) come last. ``None`` when the probe has no mate or its whole
    column is MISSING.
    """
    positions: List[Optional[int]] = []
    gallery_index = np.arange(ordered.shape[0])
    for j, subject in enumerate(probe_subjects):
        column = ordered[:, j]
        mates = np.flatnonzero(gallery_subjects == subject)
        if mates.size == 0 or np.all(np.isneginf(column)):
            positions.append(None)
            continue
        best = None
        for m in mates:
            ahead = np.count_nonzero(column > column[m]) + np.count_nonzero(
                (column == column[m]) & (gallery_index < m)
            )
            best = ahead if best is None else min(best, ahead)
        positions.append(int(best))
    return positions


def cmc_curve(
    matrix: SimilarityMatrix,
    gallery_subjects: Sequence[str],
    probe_subjects: Sequence[str],
) -> np.ndarray:
    """Rank-k accuracy for k = 1..len(gallery), closed-set."""
    gallery_subjects = np.asarray(gallery_subjects, dtype=object)
    if len(gallery_subjects) != matrix.shape[0] or len(probe_subjects) != matrix.shape[1]:
        raise ConfigurationError("Subject labels do not match the similarity matrix")
    enrolled = set(gallery_subjects.tolist())
    absent = sorted({s for s in probe_subjects if s not in enrolled})
    if absent:
        raise ConfigurationError(
            f"Closed-set identification with probes of unenrolled subjects {absent[:5]}"
        )
    if matrix.shape[1] == 0:
        raise MetricUnavailableError("CMC needs at least one probe")

    positions = _mate_positions(matrix.ordered_scores(), gallery_subjects, probe_subjects)
    hits = np.zeros(matrix.shape[0], dtype=np.int64)
    for position in positions:
        if position is not None:
            hits[position] += 1
    return np.cumsum(hits) / len(positions)


def tpir_at_fpir(
    matrix: SimilarityMatrix,
    gallery_subjects: Sequence[str],
    probe_subjects: Sequence[str],
    fpir_targets: Sequence[float] = (0.01, 0.1),
) -> Dict[float, float]:
    """Open-set search rates; impostor probes are those of unenrolled subjects."""
    gallery_subjects = np.asarray(gallery_subjects, dtype=object)
    if len(gallery_subjects) != matrix.shape[0] or len(probe_subjects) != matrix.shape[1]:
        raise ConfigurationError("Subject labels do not match the similarity matrix")
    enrolled = set(gallery_subjects.tolist())
    genuine = np.array([s in enrolled for s in probe_subjects], dtype=bool)
    if not np.any(~genuine):
        raise MetricUnavailableError("Open-set metrics need impostor probes")
    if not np.any(genuine):
        raise MetricUnavailableError("Open-set metrics need genuine probes")

    ordered = matrix.ordered_scores()
    top = ordered.max(axis=0) if matrix.shape[0] else np.full(matrix.shape[1], -np.inf)
    positions = _mate_positions(ordered, gallery_subjects, probe_subjects)
    hit_scores = np.array(
        [
            top[j] if genuine[j] and positions[j] == 0 else -np.inf
            for j in range(matrix.shape[1])
        ]
    )[genuine]
    impostor_tops = np.sort(top[~genuine])
    hit_scores = np.sort(hit_scores)

    thresholds = np.concatenate(([np.inf], np.unique(top[np.isfinite(top)])[::-1]))
    fpir = _accepted_counts(impostor_tops, thresholds) / impostor_tops.size
    tpir = _accepted_counts(hit_scores, thresholds) / hit_scores.size
    return {
        float(target): float(np.max(tpir[fpir <= target]))
        for target in fpir_targets
    }
