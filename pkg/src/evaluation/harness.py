"""Per-split evaluation: pool, optionally embed, score and measure."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ConfigurationError, MetricUnavailableError
from src.core.types import (
    EmbeddingDataset,
    EmbeddingMatrix,
    Objective,
    SimilarityMatrix,
    Template,
    TrainConfig,
)
from src.embedding.normalize import l2_normalize_rows
from src.embedding.training import fit_embedding
from src.embedding.triplet import project_rows
from src.evaluation.metrics import (
    RocPoint,
    cmc_curve,
    equal_error_rate,
    roc_from_arrays,
    tar_at_far,
    tpir_at_fpir,
)
from src.evaluation.protocol import EvalMode, Protocol, Setup, Split, resolve_setup, split_subjects
from src.evaluation.similarity import build_similarity_matrix, matrix_pairs
from src.pooling.templates import PoolingConfig, pool_templates

logger = logging.getLogger(__name__)

PooledVectors = Dict[str, Optional[np.ndarray]]


@dataclass(frozen=True)
class EvalConfig:
    far_targets: Tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    ranks: Tuple[int, ...] = (1, 5, 10)
    fpir_targets: Tuple[float, ...] = (0.01, 0.1)
    setup: Setup = Setup.AUTOMATIC
    pooling: PoolingConfig = PoolingConfig()
    renormalize: bool = True

    def __post_init__(self):
        if any(not 0.0 <= t <= 1.0 for t in self.far_targets + self.fpir_targets):
            raise ConfigurationError("FAR and FPIR targets must lie in [0, 1]")
        if any(k < 1 for k in self.ranks):
            raise ConfigurationError("CMC ranks start at 1")


@dataclass
class SplitResult:
    split_index: int
    metrics: Dict[str, float]
    matrix: SimilarityMatrix
    roc: List[RocPoint] = field(default_factory=list)
    cmc: Optional[np.ndarray] = None


def far_key(target: float) -> str:
    return f"tar@far={target:g}"


def rank_key(rank: int) -> str:
    return f"rank-{rank}"


def fpir_key(target: float) -> str:
    return f"tpir@fpir={target:g}"


def evaluate_split(
    split: Split,
    templates: Mapping[str, Template],
    vectors: Mapping[str, Optional[np.ndarray]],
    config: EvalConfig = EvalConfig(),
    mode: EvalMode = EvalMode.VERIFICATION,
) -> SplitResult:
    """Verification, closed-set and open-set metrics of one split.

    Metrics that the split cannot support (for example open-set rates
    without impostor probes) are left out with a warning. A closed-set
    split must enroll every probe subject in its gallery.
    """
    matrix = build_similarity_matrix(split.gallery, split.probe, vectors)
    gallery_subjects, probe_subjects = split_subjects(split, templates)
    metrics: Dict[str, float] = {}
    result = SplitResult(split_index=split.index, metrics=metrics, matrix=matrix)

    try:
        result.roc = roc_from_arrays(*matrix_pairs(matrix, gallery_subjects, probe_subjects))
        for target in config.far_targets:
            metrics[far_key(target)] = tar_at_far(result.roc, target)
        metrics["eer"] = equal_error_rate(result.roc)
    except MetricUnavailableError as exc:
        logger.warning("Split %d: verification metrics skipped: %s", split.index, exc)

    enrolled = set(gallery_subjects)
    mated = [j for j, s in enumerate(probe_subjects) if s in enrolled]
    if mode is EvalMode.CLOSED_SET and len(mated) < len(probe_subjects):
        absent = sorted({s for s in probe_subjects if s not in enrolled})
        raise ConfigurationError(
            f"Split {split.index}: probe subjects {absent[:5]} are not in the closed-set gallery"
        )
    if mated:
        mated_matrix = SimilarityMatrix(
            matrix.gallery_ids,
            [matrix.probe_ids[j] for j in mated],
            matrix.scores[:, mated],
            matrix.missing[:, mated],
        )
        result.cmc = cmc_curve(mated_matrix, gallery_subjects, [probe_subjects[j] for j in mated])
        for rank in config.ranks:
            metrics[rank_key(rank)] = float(result.cmc[min(rank, result.cmc.size) - 1])
    else:
        logger.warning("Split %d: no mated probes, CMC skipped", split.index)

    try:
        rates = tpir_at_fpir(matrix, gallery_subjects, probe_subjects, config.fpir_targets)
        for target, rate in rates.items():
            metrics[fpir_key(target)] = rate
    except MetricUnavailableError as exc:
        logger.warning("Split %d: open-set metrics skipped: %s", split.index, exc)

    logger.info(
        "Split %d: %d gallery x %d probe, %s",
        split.index,
        len(split.gallery),
        len(split.probe),
        ", ".join(f"{k}={v:.4f}" for k, v in metrics.items()),
    )
    return result


def training_pool(split: Split, templates: Mapping[str, Template]) -> EmbeddingDataset:
    """Unit-normalized member embeddings of the split's training templates."""
    members = [m for tid in split.train for m in templates[tid].members]
    if not members:
        raise ConfigurationError(f"Split {split.index} has no training embeddings")
    pool = EmbeddingDataset.from_embeddings(members)
    return replace(pool, vectors=l2_normalize_rows(pool.vectors))


def project_vectors(
    vectors: Mapping[str, Optional[np.ndarray]], W: EmbeddingMatrix, renormalize: bool = True
) -> PooledVectors:
    kept = [tid for tid, v in vectors.items() if v is not None]
    projected: PooledVectors = {tid: None for tid in vectors}
    if kept:
        rows = project_rows(W, np.stack([vectors[t] for t in kept]), renormalize=renormalize)
        projected.update(zip(kept, rows))
    return projected


def run_split(
    split: Split,
    templates: Mapping[str, Template],
    config: EvalConfig,
    manual_templates: Optional[Mapping[str, Template]] = None,
    matrix: Optional[EmbeddingMatrix] = None,
    objective: Optional[Objective] = None,
    train_cfg: Optional[TrainConfig] = None,
    mode: EvalMode = EvalMode.VERIFICATION,
) -> SplitResult:
    """Pool the split's test templates, embed them if asked, then evaluate.

    With ``objective`` set, a projection is trained on the split's own
    training templates (seed offset by the split index); otherwise
    ``matrix``, when given, is applied as is.
    """
    split.validate(templates)
    test_ids = list(dict.fromkeys(split.gallery + split.probe))
    W = matrix
    if objective is not None:
        cfg = train_cfg or TrainConfig()
        cfg = replace(cfg, seed=cfg.seed + split.index)
        W = fit_embedding(training_pool(split, templates), cfg, objective).matrix

    def vectors_for(source: Optional[Mapping[str, Template]]) -> Optional[PooledVectors]:
        if source is None:
            return None
        absent = [t for t in test_ids if t not in source]
        if absent:
            raise ConfigurationError(
                f"Split {split.index}: templates {absent[:5]} have no entry in the manifest"
            )
        pooled = pool_templates({t: source[t] for t in test_ids}, config.pooling)
        return pooled if W is None else project_vectors(pooled, W, config.renormalize)

    automatic = None if config.setup is Setup.MANUAL else vectors_for(templates)
    manual = None if config.setup is Setup.AUTOMATIC else vectors_for(manual_templates)
    vectors = resolve_setup(manual, automatic, config.setup)
    return evaluate_split(split, templates, vectors, config, mode)


def run_protocol(
    protocol: Protocol,
    templates: Mapping[str, Template],
    config: EvalConfig = EvalConfig(),
    manual_templates: Optional[Mapping[str, Template]] = None,
    matrix: Optional[EmbeddingMatrix] = None,
    objective: Optional[Objective] = None,
    train_cfg: Optional[TrainConfig] = None,
    threads: int = 1,
) -> List[SplitResult]:
    """Evaluate every split; results come back in split order."""
    if not protocol.splits:
        raise ConfigurationError("Protocol has no splits")
    if matrix is not None and objective is not None:
        raise ConfigurationError("Pass either a fixed matrix or an objective to train, not both")

    def job(split: Split) -> SplitResult:
        return run_split(
            split, templates, config, manual_templates, matrix, objective, train_cfg, protocol.mode
        )

    if threads <= 1:
        return [job(split) for split in protocol.splits]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(job, protocol.splits))


def metric_rows(results: Sequence[SplitResult]) -> List[Dict[str, float]]:
    return [result.metrics for result in results]
