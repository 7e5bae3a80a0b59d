"""Teacher-side target construction.

Everything produced here is a constant for gradient purposes: weighted
multi-teacher text embeddings, soft target distributions, and
pseudo-ranking permutations for the listwise loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, ShapeError
from .tensor import (
    EmbeddingBatch,
    RowDistribution,
    cosine_sim_matrix,
    normalize_rows,
    softmax_rows,
)


@dataclass(frozen=True)
class TeacherEnsemble:
    teachers: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.teachers) < 1:
            raise ShapeError("ensemble needs at least one teacher")
        if len(self.weights) != len(self.teachers):
            raise ShapeError("one weight per teacher required")
        shape = self.teachers[0].data.shape
        for t in self.teachers:
            if t.data.shape != shape:
                raise ShapeError("all teachers must share the same shape")
        w = np.asarray(self.weights, dtype=np.float64)
        if np.min(w) < 0:
            raise NumericsError("teacher weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise NumericsError(f"teacher weights sum to {w.sum()}, expected 1")
        object.__setattr__(self, "teachers", tuple(self.teachers))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))


@dataclass(frozen=True)
class RankingLabels:
    """Per-anchor candidate permutations, anchor's own index excluded."""

    perms: tuple
    m: int


def combine_teachers(ensemble: TeacherEnsemble) -> EmbeddingBatch:
    """Weighted sum of teacher embeddings, L2-normalized per row."""
    acc = np.zeros_like(ensemble.teachers[0].data)
    for w, t in zip(ensemble.weights, ensemble.teachers):
        acc += w * t.data
    return EmbeddingBatch(normalize_rows(acc), normalized=True)


def target_distribution(teacher: EmbeddingBatch, tau_dist: float) -> RowDistribution:
    """Soft targets: row softmax of the teacher's self-similarity matrix."""
    return softmax_rows(cosine_sim_matrix(teacher, teacher), tau_dist)


def pseudo_rank_labels(teacher: EmbeddingBatch) -> RankingLabels:
    """Descending-similarity candidate order per anchor, self excluded.

    Ties break by ascending candidate index (stable sort), so the output
    is fully deterministic.
    """
    n = teacher.n
    if n < 2:
        raise ShapeError("ranking needs at least 2 samples")
    sim = cosine_sim_matrix(teacher, teacher).data
    perms = []
    for i in range(n):
        candidates = np.array([j for j in range(n) if j != i], dtype=np.int64)
        order = np.argsort(-sim[i, candidates], kind="stable")
        perms.append(tuple(int(c) for c in candidates[order]))
    return RankingLabels(perms=tuple(perms), m=n - 1)
