"""Two-stage tracklet linking.

Stage one associates detections with tracklets: confident tracklets first
(local association), the rest with whatever detections remain (global
association). Stage two updates every tracklet's confidence. Once the
stream ends, ``merge_fragments`` joins terminated fragments to the
tracklets that continue them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from src.assoc.boxes import Detection, overlap_ratio
from src.assoc.config import AssocConfig
from src.assoc.hungarian import gated_assign
from src.assoc.motion import ConstantVelocityPredictor
from src.assoc.tracklet import Tracklet
from src.embedding.similarity import cosine_similarity_matrix

logger = logging.getLogger(__name__)

FragmentLink = Tuple[str, str]


@dataclass
class LinkResult:
    # tracklet id -> position in the detection list
    assignments: Dict[str, int] = field(default_factory=dict)
    local: Dict[str, int] = field(default_factory=dict)
    global_: Dict[str, int] = field(default_factory=dict)
    unassigned: List[int] = field(default_factory=list)


def affinity(overlap: float, a: Optional[np.ndarray], b: Optional[np.ndarray], cfg: AssocConfig) -> float:
    if a is None or b is None:
        return overlap
    cosine = float(cosine_similarity_matrix([a], [b])[0, 0])
    return cfg.appearance_weight * overlap + (1.0 - cfg.appearance_weight) * cosine


def affinity_matrix(
    tracklets: Sequence[Tracklet], detections: Sequence[Detection], cfg: AssocConfig
) -> np.ndarray:
    scores = np.zeros((len(tracklets), len(detections)))
    for i, tracklet in enumerate(tracklets):
        for j, detection in enumerate(detections):
            overlap = overlap_ratio(detection.box, tracklet.latest_box)
            scores[i, j] = affinity(overlap, tracklet.appearance, detection.appearance, cfg)
    return scores


def _associate(
    tracklets: Sequence[Tracklet],
    detections: Sequence[Detection],
    positions: Sequence[int],
    cfg: AssocConfig,
) -> Dict[str, int]:
    if not tracklets or not positions:
        return {}
    scores = affinity_matrix(tracklets, [detections[p] for p in positions], cfg)
    assignment = gated_assign(1.0 - scores, scores >= cfg.min_affinity)
    return {tracklets[r].id: positions[c] for r, c in assignment.items()}


def link_tracklets(
    tracklets: Sequence[Tracklet], boxes: Sequence[Detection], cfg: AssocConfig = AssocConfig()
) -> LinkResult:
    """Associate ``boxes`` with the active tracklets and update confidences.

    Only active tracklets take part in association and have their
    confidence updated.
    """
    active = [t for t in tracklets if t.is_active]
    high = [t for t in active if t.confidence >= cfg.high_confidence]
    low = [t for t in active if t.confidence < cfg.high_confidence]

    result = LinkResult()
    result.local = _associate(high, boxes, list(range(len(boxes))), cfg)
    taken = set(result.local.values())
    remaining = [p for p in range(len(boxes)) if p not in taken]
    result.global_ = _associate(low, boxes, remaining, cfg)
    result.assignments = {**result.local, **result.global_}
    taken |= set(result.global_.values())
    result.unassigned = [p for p in range(len(boxes)) if p not in taken]

    for tracklet in active:
        tracklet.record_opportunity(tracklet.id in result.assignments, cfg.confidence_decay)
    return result


def link_cost(tail: Tracklet, head: Tracklet, cfg: AssocConfig = AssocConfig()) -> float:
    """1 - affinity between ``tail`` carried forward and ``head``'s first box."""
    start = head.first_frame
    predicted = ConstantVelocityPredictor().predict(tail, start)
    overlap = overlap_ratio(head.boxes[start], predicted)
    return 1.0 - affinity(overlap, tail.appearance, head.initial_appearance, cfg)


def merge_fragments(
    tracklets: Sequence[Tracklet], cfg: AssocConfig = AssocConfig()
) -> Tuple[Dict[str, str], List[FragmentLink]]:
    """Join terminated tracklets to later tracklets that continue them.

    Returns the identity of every tracklet (the id of the earliest tracklet
    in its chain) and the accepted ``(tail, head)`` links.
    """
    ordered = sorted(tracklets, key=lambda t: (t.first_frame, t.id))
    tails = [t for t in ordered if not t.is_active]
    candidates = np.zeros((len(tails), len(ordered)))
    allowed = np.zeros(candidates.shape, dtype=bool)
    for i, tail in enumerate(tails):
        end = tail.refreshed_frames[-1]
        for j, head in enumerate(ordered):
            gap = head.first_frame - end
            if head is tail or gap <= 0 or gap > cfg.max_link_gap:
                continue
            candidates[i, j] = link_cost(tail, head, cfg)
            allowed[i, j] = candidates[i, j] < cfg.merge_cost_max

    links = [
        (tails[i].id, ordered[j].id) for i, j in sorted(gated_assign(candidates, allowed).items())
    ]
    graph = nx.Graph()
    graph.add_nodes_from(t.id for t in ordered)
    graph.add_edges_from(links)
    rank = {t.id: position for position, t in enumerate(ordered)}
    identities: Dict[str, str] = {}
    for component in nx.connected_components(graph):
        root = min(component, key=rank.__getitem__)
        identities.update({tid: root for tid in component})
    if links:
        logger.debug("Merged fragments %s", links)
    return {t.id: identities[t.id] for t in ordered}, links
