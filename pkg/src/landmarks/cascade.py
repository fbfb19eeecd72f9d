"""Cascaded linear shape regression.

Stage t moves the current estimate by a linear function of features read
around it:  S_t = S_{t-1} + W_t phi_t(I, S_{t-1}).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.core.errors import ConfigurationError, DimensionMismatchError, SingularSystemError
from src.landmarks.features import FeatureFunction
from src.landmarks.shapes import Shape, rms_point_error

logger = logging.getLogger(__name__)

DEFAULT_PATCH_SCALES = (0.4, 0.3, 0.2, 0.15, 0.1)

Sample = Tuple[np.ndarray, Shape]


@dataclass(frozen=True)
class CascadeConfig:
    stages: int = 5
    ridge: float = 1e-3
    patch_scales: Optional[Tuple[float, ...]] = None
    pairs_per_point: int = 8
    feature_seed: int = 0

    def __post_init__(self):
        if self.stages <= 0:
            raise ConfigurationError("A cascade needs at least one stage")
        if self.ridge < 0:
            raise ConfigurationError("ridge must be non-negative")
        scales = self.scales()
        if len(scales) != self.stages:
            raise ConfigurationError(f"{len(scales)} patch scales for {self.stages} stages")
        if any(b >= a for a, b in zip(scales, scales[1:])) or scales[-1] <= 0:
            raise ConfigurationError("Patch scales must be positive and strictly decreasing")

    def scales(self) -> Tuple[float, ...]:
        if self.patch_scales is not None:
            return tuple(float(s) for s in self.patch_scales)
        if self.stages == len(DEFAULT_PATCH_SCALES):
            return DEFAULT_PATCH_SCALES
        return tuple(float(s) for s in np.geomspace(0.4, 0.1, self.stages))


@dataclass(frozen=True, eq=False)
class StageRegressor:
    stage_index: int
    weights: np.ndarray
    patch_scale: float

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        if weights.ndim != 2 or not np.all(np.isfinite(weights)):
            raise ConfigurationError("Stage weights must be a finite matrix")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    def increment(self, features: np.ndarray) -> np.ndarray:
        if features.shape != (self.weights.shape[1],):
            raise DimensionMismatchError(
                f"Stage {self.stage_index} expects {self.weights.shape[1]} features, "
                f"got {features.shape}"
            )
        return self.weights @ features


def cascade_trace(
    img: np.ndarray, S0: Shape, stages: Sequence[StageRegressor], phi: FeatureFunction
) -> List[Shape]:
    """Estimates S0, S1, ..., ST."""
    if not stages:
        raise ConfigurationError("cascade_predict needs at least one stage")
    trace = [S0]
    for stage in stages:
        current = trace[-1]
        trace.append(current.shifted(stage.increment(phi(img, current, stage.patch_scale))))
    return trace


def cascade_predict(
    img: np.ndarray, S0: Shape, stages: Sequence[StageRegressor], phi: FeatureFunction
) -> Shape:
    return cascade_trace(img, S0, stages, phi)[-1]


def fit_stage(features: np.ndarray, residuals: np.ndarray, ridge: float) -> np.ndarray:
    """Ridge solution W (2L x F) of residuals ~ features @ W.T."""
    gram = features.T @ features
    if ridge == 0.0 and np.linalg.matrix_rank(features) < features.shape[1]:
        raise SingularSystemError(
            "Normal equations are singular; train with ridge > 0"
        )
    gram[np.diag_indices_from(gram)] += ridge
    try:
        solution = scipy.linalg.solve(gram, features.T @ residuals, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "Normal equations could not be solved; train with ridge > 0"
        ) from exc
    return solution.T


def cascade_train(
    samples: Sequence[Sample],
    mean_shape: Shape,
    phi: FeatureFunction,
    cfg: CascadeConfig = CascadeConfig(),
) -> List[StageRegressor]:
    """Fit ``cfg.stages`` regressors, each on the residuals the previous ones left."""
    if len(samples) < 2:
        raise ConfigurationError("cascade_train needs at least 2 samples")
    if any(len(truth) != len(mean_shape) for _, truth in samples):
        raise DimensionMismatchError("Training shapes and the mean shape differ in point count")

    truths = [truth for _, truth in samples]
    current = [mean_shape] * len(samples)
    target = np.stack([t.flat() for t in truths])
    stages: List[StageRegressor] = []
    logger.info("Stage 0: rms point error %.4f", rms_point_error(current, truths))
    for index, scale in enumerate(cfg.scales(), start=1):
        features = np.stack([phi(img, shape, scale) for (img, _), shape in zip(samples, current)])
        residuals = target - np.stack([s.flat() for s in current])
        stage = StageRegressor(index, fit_stage(features, residuals, cfg.ridge), scale)
        stages.append(stage)
        current = [s.shifted(stage.weights @ f) for s, f in zip(current, features)]
        logger.info("Stage %d: rms point error %.4f", index, rms_point_error(current, truths))
    return stages


def stage_errors(
    samples: Sequence[Sample],
    S0: Shape,
    stages: Sequence[StageRegressor],
    phi: FeatureFunction,
) -> List[float]:
    """RMS point error after 0, 1, ..., T stages."""
    traces = [cascade_trace(img, S0, stages, phi) for img, _ in samples]
    truths = [truth for _, truth in samples]
    return [
        rms_point_error([trace[t] for trace in traces], truths) for t in range(len(stages) + 1)
    ]
