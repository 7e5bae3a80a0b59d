"""Measurement apparatus: Spearman correlation, alignment/uniformity,
retrieval recall, and scatter-file export."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericsError, ShapeError
from .tensor import EmbeddingBatch, SimilarityMatrix, normalize_rows


@dataclass(frozen=True)
class MetricReport:
    spearman: float
    alignment: float
    uniformity: float
    recall_at: dict


def _fractional_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks for ties (1-based fractional ranking)."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(pred, gold) -> float:
    """Pearson correlation of fractional ranks."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gold, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 1 or p.size < 2:
        raise ShapeError("inputs must be equal-length 1-d arrays with >= 2 entries")
    rp = _fractional_ranks(p)
    rg = _fractional_ranks(g)
    rp -= rp.mean()
    rg -= rg.mean()
    denom = np.sqrt((rp * rp).sum() * (rg * rg).sum())
    if denom == 0.0:
        raise NumericsError("undefined correlation: an input has zero rank variance")
    return float((rp * rg).sum() / denom)


def alignment_metric(x: EmbeddingBatch, x_pos: EmbeddingBatch) -> float:
    """Mean squared distance between normalized positive pairs."""
    if x.data.shape != x_pos.data.shape:
        raise ShapeError("positive pairs must share the batch shape")
    xn = normalize_rows(x.data)
    pn = normalize_rows(x_pos.data)
    return float(np.mean(np.sum((xn - pn) ** 2, axis=1)))


def uniformity_metric(x: EmbeddingBatch) -> float:
    """log mean over distinct pairs of exp(-2 * squared distance)."""
    if x.n < 2:
        raise ShapeError("uniformity needs at least 2 rows")
    xn = normalize_rows(x.data)
    iu, ju = np.triu_indices(x.n, k=1)
    d2 = np.sum((xn[iu] - xn[ju]) ** 2, axis=1)
    z = -2.0 * d2
    zmax = z.max()
    return float(zmax + np.log(np.mean(np.exp(z - zmax))))


def recall_at_k(sim: SimilarityMatrix, k: int) -> tuple[float, float]:
    """Top-k retrieval accuracy along rows and along columns.

    The true match of row i / column j is the diagonal entry; ties break
    by ascending index.
    """
    mat = sim.data
    n = mat.shape[0]
    if mat.shape[0] != mat.shape[1]:
        raise ShapeError("recall needs a square index-aligned matrix")
    if not (1 <= k <= n):
        raise ShapeError(f"k={k} out of range [1, {n}]")

    def _recall(rows: np.ndarray) -> float:
        hits = 0
        for i in range(n):
            order = np.argsort(-rows[i], kind="stable")
            if i in order[:k]:
                hits += 1
        return hits / n

    return _recall(mat), _recall(mat.T)


def export_anisotropy_scatter(pairs, path) -> None:
    """Write (gold score, predicted cosine) pairs as a TSV for plotting."""
    lines = ["#gold\tcosine"]
    for pred_cos, gold in pairs:
        if not (np.isfinite(pred_cos) and np.isfinite(gold)):
            raise NumericsError("scatter values must be finite")
        lines.append(f"{gold:.9g}\t{pred_cos:.9g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
