from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from src.core.errors import ConfigurationError
from src.core.types import EmbeddingDataset, EmbeddingMatrix, Objective, Triplet

DrawnTriplet = Tuple[int, int, int, float]


class TripletSampler:
    """Online hard-negative sampling over an in-memory pool.

    Each draw picks an anchor uniformly among embeddings whose subject has a
    second member, a positive uniformly among those other members, then
    scores a random sample of ``negatives_pool`` instances and keeps the
    negative that violates the margin most.
    """

    def __init__(
        self,
        pool: EmbeddingDataset,
        alpha: float,
        negatives_pool: int = 1000,
        objective: Objective = Objective.TSE,
    ):
        groups = pool.indices_by_subject()
        if len(groups) < 2:
            raise ConfigurationError(
                f"Triplet sampling needs at least 2 subjects, pool has {len(groups)}"
            )
        if not any(len(indices) >= 2 for indices in groups.values()):
            raise ConfigurationError(
                "Triplet sampling needs a subject with at least 2 embeddings"
            )
        if negatives_pool <= 0:
            raise ConfigurationError("negatives_pool must be positive")
        self.pool = pool
        self.alpha = alpha
        self.negatives_pool = negatives_pool
        self.objective = objective
        self.vectors = np.asarray(pool.vectors, dtype=np.float64)
        codes = {subject: code for code, subject in enumerate(groups)}
        self.labels = np.array([codes[s] for s in pool.subject_ids])
        self.members = {codes[s]: np.array(idx) for s, idx in groups.items()}
        self.anchors = np.array(
            [i for idx in groups.values() if len(idx) >= 2 for i in idx]
        )

    def _violations(self, W: np.ndarray, anchor: int, positive: int, candidates: np.ndarray) -> np.ndarray:
        a = self.vectors[anchor]
        p = self.vectors[positive]
        X = self.vectors[candidates]
        if self.objective is Objective.TSE:
            Wa = W @ a
            return self.alpha + (X @ W.T) @ Wa - Wa @ (W @ p)
        dp = W @ (a - p)
        dn = (a - X) @ W.T
        return self.alpha + dp @ dp - np.einsum("ij,ij->i", dn, dn)

    def draw(self, W: np.ndarray, rng: np.random.Generator) -> Optional[DrawnTriplet]:
        anchor = int(self.anchors[rng.integers(self.anchors.size)])
        same = self.members[self.labels[anchor]]
        others = same[same != anchor]
        positive = int(others[rng.integers(others.size)])
        size = min(self.negatives_pool, self.vectors.shape[0])
        candidates = rng.choice(self.vectors.shape[0], size=size, replace=False)
        candidates = candidates[self.labels[candidates] != self.labels[anchor]]
        if candidates.size == 0:
            return None
        violations = self._violations(W, anchor, positive, candidates)
        best = int(np.argmax(violations))
        if violations[best] <= 0.0:
            return None
        return anchor, positive, int(candidates[best]), float(violations[best])

    def triplet(self, drawn: DrawnTriplet) -> Triplet:
        anchor, positive, negative, _ = drawn
        return Triplet(
            anchor=self.pool.embedding(anchor),
            positive=self.pool.embedding(positive),
            negative=self.pool.embedding(negative),
        )


def sample_hard_triplet(
    pool: EmbeddingDataset,
    W: EmbeddingMatrix,
    alpha: float,
    rng: np.random.Generator,
    negatives_pool: int = 1000,
    objective: Objective = Objective.TSE,
) -> Optional[Triplet]:
    sampler = TripletSampler(pool, alpha, negatives_pool, objective)
    drawn = sampler.draw(W.entries, rng)
    return None if drawn is None else sampler.triplet(drawn)


def sample_triplets(pool: EmbeddingDataset, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly drawn (anchor, positive, negative) index rows, no mining."""
    sampler = TripletSampler(pool, alpha=0.0)
    rows = np.empty((count, 3), dtype=np.int64)
    n = len(pool)
    for row in range(count):
        anchor = int(sampler.anchors[rng.integers(sampler.anchors.size)])
        same = sampler.members[sampler.labels[anchor]]
        others = same[same != anchor]
        positive = int(others[rng.integers(others.size)])
        negative = int(rng.integers(n))
        while sampler.labels[negative] == sampler.labels[anchor]:
            negative = int(rng.integers(n))
        rows[row] = (anchor, positive, negative)
    return rows


def mean_hinge_loss(
    W: EmbeddingMatrix,
    pool: EmbeddingDataset,
    triplets: np.ndarray,
    alpha: float,
    objective: Objective = Objective.TSE,
) -> float:
    X = np.asarray(pool.vectors, dtype=np.float64)
    P = X @ W.entries.T
    a, p, n = P[triplets[:, 0]], P[triplets[:, 1]], P[triplets[:, 2]]
    if objective is Objective.TSE:
        violations = alpha + np.einsum("ij,ij->i", a, n) - np.einsum("ij,ij->i", a, p)
    else:
        dp, dn = a - p, a - n
        violations = alpha + np.einsum("ij,ij->i", dp, dp) - np.einsum("ij,ij->i", dn, dn)
    return float(np.mean(np.maximum(violations, 0.0)))
