from __future__ import annotations

from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError, UnknownTemplateError
from src.core.types import SimilarityMatrix
from src.embedding.similarity import cosine_similarity_matrix
from src.evaluation.metrics import ScoredPair

PooledVectors = Mapping[str, Optional[np.ndarray]]


def _lookup(pooled: PooledVectors, ids: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked vectors for ``ids`` (zeros where missing) and the missing mask."""
    vectors, missing = [], []
    dim = None
    for tid in ids:
        if tid not in pooled:
            raise UnknownTemplateError(f"No pooled vector entry for template {tid!r}")
        vector = pooled[tid]
        missing.append(vector is None)
        if vector is not None:
            dim = len(vector) if dim is None else dim
        vectors.append(vector)
    if dim is None:
        return np.zeros((len(ids), 1)), np.ones(len(ids), dtype=bool)
    stacked = np.stack([np.zeros(dim) if v is None else np.asarray(v, dtype=np.float64) for v in vectors])
    return stacked, np.array(missing, dtype=bool)


def build_similarity_matrix(
    gallery_ids: Sequence[str], probe_ids: Sequence[str], pooled: PooledVectors
) -> SimilarityMatrix:
    """Cosine score per (gallery, probe) cell; missing templates give MISSING rows/columns."""
    gallery, gallery_missing = _lookup(pooled, gallery_ids)
    probe, probe_missing = _lookup(pooled, probe_ids)
    if gallery.shape[1] != probe.shape[1] and not (gallery_missing.all() or probe_missing.all()):
        raise ConfigurationError(
            f"Gallery vectors of dimension {gallery.shape[1]} and probe vectors of "
            f"dimension {probe.shape[1]} cannot be compared"
        )
    missing = gallery_missing[:, None] | probe_missing[None, :]
    if missing.all():
        scores = np.zeros(missing.shape)
    else:
        scores = cosine_similarity_matrix(gallery, probe)
    return SimilarityMatrix(gallery_ids, probe_ids, scores, missing)


def score_pairs(
    pairs: Sequence[Tuple[str, str]],
    pooled: PooledVectors,
    subjects: Mapping[str, str],
) -> List[ScoredPair]:
    """Scores for a curated list of (gallery, probe) template pairs."""
    scored: List[ScoredPair] = []
    for gallery_id, probe_id in pairs:
        for tid in (gallery_id, probe_id):
            if tid not in pooled or tid not in subjects:
                raise UnknownTemplateError(f"Pair references unknown template {tid!r}")
        same = subjects[gallery_id] == subjects[probe_id]
        a, b = pooled[gallery_id], pooled[probe_id]
        if a is None or b is None:
            scored.append((None, same))
            continue
        scored.append((float(cosine_similarity_matrix([a], [b])[0, 0]), same))
    return scored


def matrix_pairs(
    matrix: SimilarityMatrix, gallery_subjects: Sequence[str], probe_subjects: Sequence[str]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every cell of ``matrix`` as (score, genuine, missing) arrays."""
    genuine = np.asarray(gallery_subjects, dtype=object)[:, None] == np.asarray(
        probe_subjects, dtype=object
    )[None, :]
    return matrix.scores.ravel(), genuine.ravel(), matrix.missing.ravel()


def all_pairs_scores(vectors: np.ndarray, labels: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Cosine and same-label flag for every unordered pair i < j."""
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels, dtype=object)
    rows, cols = np.triu_indices(vectors.shape[0], k=1)
    scores = cosine_similarity_matrix(vectors, vectors)
    return scores[rows, cols], labels[rows] == labels[cols]
