from __future__ import annotations

import logging
from dataclasses import replace
from typing import List, Sequence

import numpy as np

from src.core.errors import ConfigurationError
from src.core.rng import seeded_rng
from src.core.types import EmbeddingDataset, Objective, TrainConfig
from src.embedding.training import fit_embedding
from src.embedding.triplet import project_rows
from src.evaluation.metrics import roc_from_arrays, tar_at_far
from src.evaluation.similarity import all_pairs_scores

logger = logging.getLogger(__name__)

SELECTION_FAR = 1e-2


def subject_folds(pool: EmbeddingDataset, folds: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Partition row indices into ``folds`` groups with disjoint subjects."""
    groups = pool.indices_by_subject()
    subjects = sorted(groups)
    if folds < 2:
        raise ConfigurationError("Cross-validation needs at least 2 folds")
    if len(subjects) < 2 * folds:
        raise ConfigurationError(
            f"{len(subjects)} subjects cannot form {folds} subject-disjoint folds "
            f"of at least 2 subjects each"
        )
    order = rng.permutation(len(subjects))
    return [
        np.array(sorted(i for s in chunk for i in groups[subjects[s]]))
        for chunk in np.array_split(order, folds)
    ]


def validation_tar(
    pool: EmbeddingDataset,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    cfg: TrainConfig,
    objective: Objective = Objective.TSE,
) -> float:
    W = fit_embedding(pool.subset(train_idx), cfg, objective).matrix
    validation = pool.subset(val_idx)
    values, same = all_pairs_scores(project_rows(W, validation.vectors), validation.subject_ids)
    return tar_at_far(roc_from_arrays(values, same), SELECTION_FAR)


def select_output_dim(
    pool: EmbeddingDataset,
    candidates: Sequence[int] = (64, 128, 256),
    folds: int = 5,
    cfg: TrainConfig = TrainConfig(),
    objective: Objective = Objective.TSE,
) -> int:
    """Candidate output dimension with the best mean validation TAR@FAR=1e-2.

    Ties go to the smaller dimension. Candidates larger than the input
    dimension are dropped.
    """
    ordered = sorted(set(int(c) for c in candidates))
    if not ordered:
        raise ConfigurationError("No candidate output dimensions given")
    usable = [c for c in ordered if c <= pool.dim]
    if len(usable) < len(ordered):
        logger.warning(
            "Dropping candidate dimensions %s above the input dimension %d",
            [c for c in ordered if c > pool.dim],
            pool.dim,
        )
    if not usable:
        raise ConfigurationError(f"Every candidate exceeds the input dimension {pool.dim}")
    if len(usable) == 1:
        return usable[0]

    fold_indices = subject_folds(pool, folds, seeded_rng(cfg.seed))
    everything = np.arange(len(pool))
    best_dim, best_score = usable[0], -np.inf
    for dim in usable:
        scores = []
        for k, val_idx in enumerate(fold_indices):
            train_idx = np.setdiff1d(everything, val_idx)
            fold_cfg = replace(cfg, output_dim=dim, seed=cfg.seed + k)
            scores.append(validation_tar(pool, train_idx, val_idx, fold_cfg, objective))
        score = float(np.mean(scores))
        logger.info("Output dimension %d: mean validation TAR@FAR=%g is %.4f", dim, SELECTION_FAR, score)
        if score > best_score:
            best_dim, best_score = dim, score
    return best_dim
