from __future__ import annotations

from dataclasses import dataclass

from src.core.errors import ConfigurationError


@dataclass(frozen=True)
class AssocConfig:
    overlap_threshold: float = 0.2
    detect_every: int = 5
    termination_frames: int = 4
    det_confidence_min: float = -1.0
    # Not given by the source method; tracklets at or above it go to local association.
    high_confidence: float = 0.5
    appearance_weight: float = 0.5
    min_affinity: float = 0.1
    confidence_decay: float = 0.9
    merge_cost_max: float = 0.6
    max_link_gap: int = 60

    def __post_init__(self):
        if not 0.0 < self.overlap_threshold < 1.0:
            raise ConfigurationError("overlap_threshold must lie in (0, 1)")
        if self.detect_every <= 0:
            raise ConfigurationError("detect_every must be positive")
        if self.termination_frames <= 0:
            raise ConfigurationError("termination_frames must be positive")
        if not 0.0 <= self.appearance_weight <= 1.0:
            raise ConfigurationError("appearance_weight must lie in [0, 1]")
        if not 0.0 < self.confidence_decay <= 1.0:
            raise ConfigurationError("confidence_decay must lie in (0, 1]")
        if self.max_link_gap < 0:
            raise ConfigurationError("max_link_gap must be non-negative")
