from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from src.core.errors import ConfigurationError, TrainingDivergenceError
from src.core.rng import seeded_rng
from src.core.types import EmbeddingDataset, EmbeddingMatrix, Objective, TrainConfig
from src.embedding.mining import TripletSampler
from src.embedding.triplet import sgd_update

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-4

LogRow = Tuple[int, float, float]


@dataclass
class TrainState:
    matrix: EmbeddingMatrix
    iteration: int = 0
    objective_trace: List[float] = field(default_factory=list)
    log: List[LogRow] = field(default_factory=list)


def initialize_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian entries with variance 1/cols."""
    return rng.normal(0.0, np.sqrt(1.0 / cols), size=(rows, cols))


def _check_pool(pool: EmbeddingDataset, cfg: TrainConfig) -> np.ndarray:
    if cfg.output_dim > pool.dim:
        raise ConfigurationError(
            f"output_dim {cfg.output_dim} exceeds the input dimension {pool.dim}"
        )
    X = np.asarray(pool.vectors, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
        raise ConfigurationError("Training vectors must be unit-norm")
    return X


def fit_embedding(
    pool: EmbeddingDataset, cfg: TrainConfig, objective: Objective = Objective.TSE
) -> TrainState:
    """Run ``cfg.iterations`` hinge-gated SGD steps on hard-mined triplets."""
    sampler = TripletSampler(pool, cfg.margin, cfg.negatives_pool, objective)
    X = _check_pool(pool, cfg)
    rng = seeded_rng(cfg.seed)
    W = initialize_matrix(cfg.output_dim, pool.dim, rng)
    state = TrainState(matrix=EmbeddingMatrix(W))

    ema = 0.0
    active = 0
    for iteration in range(1, cfg.iterations + 1):
        drawn = sampler.draw(W, rng)
        loss = 0.0
        if drawn is not None:
            anchor, positive, negative, _ = drawn
            try:
                W, loss = sgd_update(
                    W,
                    X[anchor],
                    X[positive],
                    X[negative],
                    cfg.learning_rate,
                    cfg.margin,
                    objective,
                )
            except TrainingDivergenceError as exc:
                raise TrainingDivergenceError(
                    f"{exc} at iteration {iteration}", state.objective_trace
                ) from exc
            if loss > 0.0:
                active += 1
        state.objective_trace.append(loss)
        ema = loss if iteration == 1 else cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * loss
        if iteration % cfg.log_every == 0 or iteration == cfg.iterations:
            state.log.append((iteration, ema, active / iteration))
            logger.info(
                "%s iteration %d: loss_ema=%.6f active_fraction=%.3f",
                objective.value,
                iteration,
                ema,
                active / iteration,
            )

    state.matrix = EmbeddingMatrix(W)
    state.iteration = cfg.iterations
    return state


def train_tse(pool: EmbeddingDataset, cfg: TrainConfig) -> EmbeddingMatrix:
    return fit_embedding(pool, cfg, Objective.TSE).matrix


def train_tde(pool: EmbeddingDataset, cfg: TrainConfig) -> EmbeddingMatrix:
    return fit_embedding(pool, cfg, Objective.TDE).matrix
