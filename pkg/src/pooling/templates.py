"""Template pooling.

Member rows are summed in lexicographic row order, so a pooled vector does
not depend on the order in which members were listed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.core.errors import ConfigurationError, MissingTemplateError
from src.core.types import Embedding, EmbeddingDataset, SourceKind, Template
from src.embedding.normalize import l2_normalize, l2_normalize_rows

logger = logging.getLogger(__name__)


class PoolingMethod(Enum):
    AVERAGE = "average"
    MEDIA = "media"


class PoolingOrder(Enum):
    NORMALIZE_THEN_AVERAGE = "normalize_then_average"
    AVERAGE_THEN_NORMALIZE = "average_then_normalize"


@dataclass(frozen=True)
class PoolingConfig:
    method: PoolingMethod = PoolingMethod.MEDIA
    order: PoolingOrder = PoolingOrder.NORMALIZE_THEN_AVERAGE


@dataclass(frozen=True, eq=False)
class MediaGroup:
    media_id: str
    members: Tuple[Embedding, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ConfigurationError(f"Media group {self.media_id!r} is empty")
        for member in self.members:
            if member.media_id != self.media_id:
                raise ConfigurationError(
                    f"Media group {self.media_id!r} holds a member of media {member.media_id!r}"
                )

    def matrix(self) -> np.ndarray:
        return np.stack([m.values for m in self.members]).astype(np.float64)


def stable_mean(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    order = np.lexsort(rows.T[::-1])
    return rows[order].sum(axis=0) / rows.shape[0]


def group_by_media(t: Template) -> List[MediaGroup]:
    """Media groups in order of first appearance."""
    groups: Dict[str, List[Embedding]] = {}
    for member in t.members:
        groups.setdefault(member.media_id, []).append(member)
    return [MediaGroup(media_id, tuple(members)) for media_id, members in groups.items()]


def _member_rows(rows: np.ndarray, order: PoolingOrder) -> np.ndarray:
    if order is PoolingOrder.NORMALIZE_THEN_AVERAGE:
        return l2_normalize_rows(rows)
    return rows


def _require_members(t: Template) -> None:
    if t.missing or not t.members:
        raise MissingTemplateError(t.template_id)


def pool_average(
    t: Template, order: PoolingOrder = PoolingOrder.NORMALIZE_THEN_AVERAGE
) -> np.ndarray:
    _require_members(t)
    rows = np.stack([m.values for m in t.members]).astype(np.float64)
    return l2_normalize(stable_mean(_member_rows(rows, order)))


def pool_media_average(
    t: Template, order: PoolingOrder = PoolingOrder.NORMALIZE_THEN_AVERAGE
) -> np.ndarray:
    """Average within each medium first, then across media."""
    _require_members(t)
    media_means = np.stack(
        [stable_mean(_member_rows(group.matrix(), order)) for group in group_by_media(t)]
    )
    return l2_normalize(stable_mean(media_means))


def pool_template(t: Template, config: PoolingConfig = PoolingConfig()) -> np.ndarray:
    if config.method is PoolingMethod.MEDIA:
        return pool_media_average(t, config.order)
    return pool_average(t, config.order)


def pool_templates(
    templates: Mapping[str, Template], config: PoolingConfig = PoolingConfig()
) -> Dict[str, Optional[np.ndarray]]:
    """Pooled vector per template id; ``None`` marks a missing template."""
    pooled: Dict[str, Optional[np.ndarray]] = {}
    for tid, template in templates.items():
        try:
            pooled[tid] = pool_template(template, config)
        except MissingTemplateError:
            pooled[tid] = None
    skipped = sum(v is None for v in pooled.values())
    if skipped:
        logger.info("%d of %d templates are missing and pool to MISSING", skipped, len(pooled))
    return pooled


def pooled_dataset(
    templates: Mapping[str, Template], pooled: Mapping[str, Optional[np.ndarray]]
) -> EmbeddingDataset:
    """Pooled vectors as an embedding dataset, template id in the media slot."""
    kept = [tid for tid in templates if pooled.get(tid) is not None]
    if not kept:
        raise ConfigurationError("No template has a pooled vector")
    return EmbeddingDataset(
        vectors=np.stack([pooled[tid] for tid in kept]),
        subject_ids=[templates[tid].subject_id for tid in kept],
        media_ids=kept,
        source_kinds=[SourceKind.IMAGE] * len(kept),
    )
