"""Dense numeric primitives: embedding batches, cosine similarity,
stable row softmax and row-wise KL divergence.

Everything here is a pure function over immutable float64 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError, ShapeError

# Floor applied inside logarithms; softmax outputs are strictly positive
# but file-loaded distributions may contain exact zeros.
KL_EPS = 1e-12


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class EmbeddingBatch:
    """A batch of row vectors in a shared representation space."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = _as_matrix(self.data)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"empty batch: shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericsError("embedding batch contains non-finite entries")
        object.__setattr__(self, "data", arr)
        if self.normalized:
            norms = np.linalg.norm(arr, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-6:
                raise NumericsError("batch flagged normalized but rows are not unit-norm")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.data, axis=1)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense n x m matrix of cosine values."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.data)
        if np.max(np.abs(arr)) > 1.0 + 1e-9:
            raise NumericsError("similarity entries outside [-1, 1]")
        object.__setattr__(self, "data", arr)


@dataclass(frozen=True)
class RowDistribution:
    """Row-stochastic matrix of probabilities."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.data)
        if np.min(arr) < 0.0:
            raise NumericsError("distribution contains negative entries")
        row_sums = arr.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > 1e-9:
            raise NumericsError("distribution rows do not sum to 1")
        object.__setattr__(self, "data", arr)


def normalize_rows(data: np.ndarray) -> np.ndarray:
    """L2-normalize every row; zero rows are a hard error."""
    data = _as_matrix(data)
    norms = np.linalg.norm(data, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise NumericsError(f"zero-norm row at index {int(zero[0])}")
    return data / norms[:, None]


def cosine_sim_matrix(a: EmbeddingBatch, b: EmbeddingBatch) -> SimilarityMatrix:
    """Pairwise cosine similarity between rows of `a` and rows of `b`."""
    if a.d != b.d:
        raise ShapeError(f"dimension mismatch: {a.d} vs {b.d}")
    ah = normalize_rows(a.data)
    bh = normalize_rows(b.data)
    sim = ah @ bh.T
    np.clip(sim, -1.0, 1.0, out=sim)
    return SimilarityMatrix(sim)


def softmax_rows(logits: SimilarityMatrix | np.ndarray, temperature: float) -> RowDistribution:
    """Row softmax of logits / temperature, stabilized by max subtraction."""
    if temperature <= 0:
        raise NumericsError(f"temperature must be positive, got {temperature}")
    arr = logits.data if isinstance(logits, SimilarityMatrix) else _as_matrix(logits)
    if not np.all(np.isfinite(arr)):
        raise NumericsError("logits contain non-finite entries")
    z = arr / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return RowDistribution(e / e.sum(axis=1, keepdims=True))


def kl_rows(q: RowDistribution, p: RowDistribution) -> np.ndarray:
    """Per-row KL(q || p), with the 0 * log(0/.) = 0 convention."""
    qd, pd = q.data, p.data
    if qd.shape != pd.shape:
        raise ShapeError(f"shape mismatch: {qd.shape} vs {pd.shape}")
    pc = np.maximum(pd, KL_EPS)
    qc = np.maximum(qd, KL_EPS)
    terms = np.where(qd > 0.0, qd * (np.log(qc) - np.log(pc)), 0.0)
    return terms.sum(axis=1)
