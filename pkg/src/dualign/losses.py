"""Differentiable training objectives.

Every loss returns a LossResult: a scalar value plus analytic gradients
with respect to the student-side inputs only. Teacher-side inputs are
constants and never appear in the gradient map.

All similarity-based losses share one backward primitive: the loss is
first differentiated with respect to the cosine-similarity matrix, then
chained through the cosine to the raw embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError, ShapeError
from .tensor import (
    EmbeddingBatch,
    RowDistribution,
    SimilarityMatrix,
    cosine_sim_matrix,
    kl_rows,
    normalize_rows,
    softmax_rows,
)


@dataclass(frozen=True)
class LossResult:
    value: float
    grads: dict

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise NumericsError(f"loss value is not finite: {self.value}")
        for name, g in self.grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"gradient for '{name}' contains non-finite entries")


@dataclass(frozen=True)
class Hyperparams:
    tau: float = 0.05
    tau_dist: float = 1.0
    lambda_w: float = 0.1
    mu_w: float = 0.2
    margin_m: float = 0.2

    def __post_init__(self):
        if self.tau <= 0 or self.tau_dist <= 0:
            raise NumericsError("temperatures must be positive")
        if not (0.0 <= self.margin_m < 1.0):
            raise NumericsError("margin must lie in [0, 1)")


def _check_same_shape(a: EmbeddingBatch, b: EmbeddingBatch):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")


def _reduce(value: float, grads: dict, n: int, reduction: str) -> LossResult:
    if reduction == "sum":
        return LossResult(value, grads)
    if reduction == "mean":
        return LossResult(value / n, {k: g / n for k, g in grads.items()})
    raise NumericsError(f"unknown reduction '{reduction}'")


def cosine_backward(grad_sim: np.ndarray, a: np.ndarray, b: np.ndarray,
                    sim: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chain a gradient w.r.t. the cosine matrix back to the raw rows.

    d sim[i,j] / d a_i = (b_hat_j - sim[i,j] * a_hat_i) / ||a_i||,
    and symmetrically for b.
    """
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ah = a / na[:, None]
    bh = b / nb[:, None]
    grad_a = (grad_sim @ bh - (grad_sim * sim).sum(axis=1)[:, None] * ah) / na[:, None]
    grad_b = (grad_sim.T @ ah - (grad_sim * sim).sum(axis=0)[:, None] * bh) / nb[:, None]
    return grad_a, grad_b


def _infonce(a: EmbeddingBatch, b: EmbeddingBatch, tau: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Shared InfoNCE core: value and the two embedding gradients."""
    sim = cosine_sim_matrix(a, b).data
    z = sim / tau
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    value = float(np.sum(lse - np.diag(z)))
    probs = softmax_rows(SimilarityMatrix(sim), tau).data
    grad_sim = (probs - np.eye(a.n)) / tau
    return value, sim, grad_sim


def loss_text_infonce(view_z: EmbeddingBatch, view_zprime: EmbeddingBatch,
                      tau: float, reduction: str = "sum") -> LossResult:
    """Dropout-view contrastive loss over a text batch; gradients for both views."""
    _check_same_shape(view_z, view_zprime)
    value, sim, grad_sim = _infonce(view_z, view_zprime, tau)
    ga, gb = cosine_backward(grad_sim, view_z.data, view_zprime.data, sim)
    return _reduce(value, {"view_z": ga, "view_zprime": gb}, view_z.n, reduction)


def loss_multimodal_infonce(student: EmbeddingBatch, image_teacher: EmbeddingBatch,
                            tau: float, reduction: str = "sum") -> LossResult:
    """Student-vs-image-teacher contrastive loss; teacher rows are constants."""
    _check_same_shape(student, image_teacher)
    value, sim, grad_sim = _infonce(student, image_teacher, tau)
    ga, _ = cosine_backward(grad_sim, student.data, image_teacher.data, sim)
    return _reduce(value, {"student": ga}, student.n, reduction)


def loss_consistency(shared_img: EmbeddingBatch, shared_txt: EmbeddingBatch,
                     labels, margin_m: float, reduction: str = "sum") -> LossResult:
    """Cosine-embedding loss over matched/mismatched pairs.

    labels: per-row flags, 1 = aligned pair, 0 = mismatched.
    Gradient only for the student text side.
    """
    _check_same_shape(shared_img, shared_txt)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (shared_img.n,):
        raise ShapeError(f"labels length {y.shape} does not match batch size {shared_img.n}")
    if not np.all((y == 0) | (y == 1)):
        raise NumericsError("pair labels must be 0 or 1")

    hh = normalize_rows(shared_img.data)
    sn = np.linalg.norm(shared_txt.data, axis=1)
    zero = np.where(sn == 0.0)[0]
    if zero.size:
        raise NumericsError(f"zero-norm row at index {int(zero[0])}")
    sh = shared_txt.data / sn[:, None]
    cos = np.clip((hh * sh).sum(axis=1), -1.0, 1.0)

    pos = y == 1
    hinge_active = (~pos) & (cos > margin_m)
    value = float(np.sum(np.where(pos, 1.0 - cos, np.maximum(0.0, cos - margin_m))))
    # d value / d cos_i; hinge subgradient at cos == m taken as 0
    dcos = np.where(pos, -1.0, 0.0)
    dcos = np.where(hinge_active, 1.0, dcos)
    grad_txt = dcos[:, None] * (hh - cos[:, None] * sh) / sn[:, None]
    return _reduce(value, {"shared_txt": grad_txt}, shared_img.n, reduction)


def _check_stochastic(q: RowDistribution, n: int, name: str):
    if q.data.shape != (n, n):
        raise ShapeError(f"{name} must be {n}x{n}, got {q.data.shape}")
    if np.max(np.abs(q.data.sum(axis=1) - 1.0)) > 1e-6:
        raise NumericsError(f"{name} rows do not sum to 1")


def loss_cross_modal_kl(student: EmbeddingBatch, image_teacher: EmbeddingBatch,
                        q_t2t: RowDistribution, q_v2v: RowDistribution,
                        tau_dist: float, reduction: str = "sum") -> LossResult:
    """Cross-modal distribution alignment.

    Both directions of the student-vs-image similarity matrix are
    row-normalized independently: texts-over-images and images-over-texts.
    Each is pulled toward the matching teacher target by KL divergence,
    and the two terms are averaged. Gradient only for `student`.
    """
    _check_same_shape(student, image_teacher)
    n = student.n
    _check_stochastic(q_t2t, n, "q_t2t")
    _check_stochastic(q_v2v, n, "q_v2v")

    sim = cosine_sim_matrix(student, image_teacher).data  # rows = texts, cols = images
    p_t2v = softmax_rows(sim.T / tau_dist, 1.0).data      # per image, over texts
    p_v2t = softmax_rows(sim / tau_dist, 1.0).data        # per text, over images
    value = 0.5 * float(
        kl_rows(q_t2t, RowDistribution(p_t2v)).sum()
        + kl_rows(q_v2v, RowDistribution(p_v2t)).sum()
    )
    grad_sim = 0.5 * ((p_t2v - q_t2t.data).T + (p_v2t - q_v2v.data)) / tau_dist
    ga, _ = cosine_backward(grad_sim, student.data, image_teacher.data, sim)
    return _reduce(value, {"student": ga}, n, reduction)


def loss_intra_modal_kl(view_z: EmbeddingBatch, view_zprime: EmbeddingBatch,
                        q_t2t: RowDistribution, tau_dist: float,
                        reduction: str = "sum") -> LossResult:
    """KL between the teacher text distribution and the student view distribution."""
    _check_same_shape(view_z, view_zprime)
    n = view_z.n
    _check_stochastic(q_t2t, n, "q_t2t")
    sim = cosine_sim_matrix(view_z, view_zprime).data
    p_t2t = softmax_rows(sim / tau_dist, 1.0).data
    value = float(kl_rows(q_t2t, RowDistribution(p_t2t)).sum())
    grad_sim = (p_t2t - q_t2t.data) / tau_dist
    ga, gb = cosine_backward(grad_sim, view_z.data, view_zprime.data, sim)
    return _reduce(value, {"view_z": ga, "view_zprime": gb}, n, reduction)


def loss_listmle(student_scores: SimilarityMatrix, teacher_perms, tau: float,
                 reduction: str = "sum") -> LossResult:
    """Listwise ranking loss against teacher permutations (Plackett-Luce NLL).

    teacher_perms[i] indexes columns of row i; all lists share length M.
    Evaluated in log space with a running log-sum-exp from the list tail.
    Gradient is with respect to the raw score matrix.
    """
    scores = student_scores.data
    n = scores.shape[0]
    if len(teacher_perms) != n:
        raise ShapeError(f"{len(teacher_perms)} permutations for {n} rows")
    value = 0.0
    grad = np.zeros_like(scores)
    for i, perm in enumerate(teacher_perms):
        perm = np.asarray(perm, dtype=np.int64)
        m = perm.size
        if m == 0:
            raise ShapeError("empty ranking list")
        if np.unique(perm).size != m or perm.min() < 0 or perm.max() >= scores.shape[1]:
            raise ShapeError(f"permutation for row {i} is not a bijection over valid columns")
        z = scores[i, perm] / tau
        zmax = z.max()
        e = np.exp(z - zmax)
        tail = np.cumsum(e[::-1])[::-1]  # tail[j] = sum_{k>=j} e[k]
        value += float(np.sum(np.log(tail) + zmax - z))
        # d/dz_k = e_k * sum_{j<=k} 1/tail_j - 1
        dz = e * np.cumsum(1.0 / tail) - 1.0
        grad[i, perm] += dz / tau
    return _reduce(value, {"student_scores": grad}, n, reduction)


def _combine(parts: list[tuple[float, LossResult]]) -> LossResult:
    value = 0.0
    grads: dict = {}
    for w, part in parts:
        value += w * part.value
        for name, g in part.grads.items():
            if name in grads:
                grads[name] = grads[name] + w * g
            else:
                grads[name] = w * g
    return LossResult(value, grads)


def loss_cml(consistency: LossResult, cma: LossResult) -> LossResult:
    """Cross-modal learning loss: consistency + cross-modal KL."""
    return _combine([(1.0, consistency), (1.0, cma)])


def loss_iml(rank: LossResult, ima: LossResult) -> LossResult:
    """Intra-modal learning loss: ranking + intra-modal KL."""
    return _combine([(1.0, rank), (1.0, ima)])


def loss_total(info: LossResult, cml: LossResult, iml: LossResult,
               lambda_w: float, mu_w: float) -> LossResult:
    """Full objective: info + lambda * cml + mu * iml."""
    return _combine([(1.0, info), (lambda_w, cml), (mu_w, iml)])
