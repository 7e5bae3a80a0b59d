"""Finite-difference validation of every analytic loss gradient.

Each check perturbs one input entry at a time (central differences) and
compares against the analytic gradient; inputs are freshly sampled from
a seed, so the harness is self-contained.
"""

from __future__ import annotations

import numpy as np

from . import losses
from .losses import Hyperparams
from .seeding import rng_for
from .teachers import pseudo_rank_labels, target_distribution
from .tensor import EmbeddingBatch, SimilarityMatrix, cosine_sim_matrix

FD_STEP = 1e-5
DEFAULT_N = 8
DEFAULT_D = 16

LOSS_NAMES = ("text_infonce", "multimodal_infonce", "consistency",
              "cross_modal_kl", "listmle", "intra_modal_kl", "total")


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    # additive floor keeps finite-difference roundoff on true-zero entries
    # from registering as spurious relative error
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b)) + 1e-3
    return float(np.max(diff / scale))


def fd_gradient(fn, arrays: dict, name: str, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of fn(arrays) w.r.t. arrays[name]."""
    base = arrays[name]
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = dict(arrays)
        plus[name] = base.copy()
        plus[name][idx] += step
        minus = dict(arrays)
        minus[name] = base.copy()
        minus[name][idx] -= step
        grad[idx] = (fn(plus) - fn(minus)) / (2 * step)
    return grad


def _random_inputs(seed: int, n: int, d: int) -> dict:
    rng = rng_for(seed, "gradcheck")
    arrays = {
        "view_z": rng.standard_normal((n, d)),
        "view_zprime": rng.standard_normal((n, d)),
        "image": rng.standard_normal((n, d)),
        "teacher": rng.standard_normal((n, d)),
        "scores": np.clip(rng.uniform(-0.9, 0.9, (n, n)), -1, 1),
    }
    arrays["labels"] = list((np.arange(n) % 2 == 0).astype(int))
    return arrays


def check_loss(loss_name: str, seed: int = 0, n: int = DEFAULT_N, d: int = DEFAULT_D,
               hp: Hyperparams | None = None) -> float:
    """Max relative error between analytic and finite-difference gradients."""
    hp = hp or Hyperparams()
    arrays = _random_inputs(seed, n, d)
    q_t2t = target_distribution(EmbeddingBatch(arrays["teacher"]), hp.tau_dist)
    q_v2v = target_distribution(EmbeddingBatch(arrays["image"]), hp.tau_dist)
    perms = pseudo_rank_labels(EmbeddingBatch(arrays["teacher"])).perms
    cons_pairs = ([(i, i, 1) for i in range(n)]
                  + [((i + 1) % n, i, 0) for i in range(n)])

    if loss_name == "text_infonce":
        def run(a):
            return losses.loss_text_infonce(
                EmbeddingBatch(a["view_z"]), EmbeddingBatch(a["view_zprime"]), hp.tau)
        checked = ("view_z", "view_zprime")
    elif loss_name == "multimodal_infonce":
        def run(a):
            return losses.loss_multimodal_infonce(
                EmbeddingBatch(a["view_z"]), EmbeddingBatch(a["image"]), hp.tau)
        checked = {"view_z": "student"}
    elif loss_name == "consistency":
        def run(a):
            return losses.loss_consistency(
                EmbeddingBatch(a["image"]), EmbeddingBatch(a["view_z"]),
                a["labels"], hp.margin_m)
        checked = {"view_z": "shared_txt"}
    elif loss_name == "cross_modal_kl":
        def run(a):
            return losses.loss_cross_modal_kl(
                EmbeddingBatch(a["view_z"]), EmbeddingBatch(a["image"]),
                q_t2t, q_v2v, hp.tau_dist)
        checked = {"view_z": "student"}
    elif loss_name == "listmle":
        def run(a):
            return losses.loss_listmle(SimilarityMatrix(a["scores"]), perms, hp.tau)
        checked = {"scores": "student_scores"}
    elif loss_name == "intra_modal_kl":
        def run(a):
            return losses.loss_intra_modal_kl(
                EmbeddingBatch(a["view_z"]), EmbeddingBatch(a["view_zprime"]),
                q_t2t, hp.tau_dist)
        checked = ("view_z", "view_zprime")
    elif loss_name == "total":
        from .train import multimodal_objective

        def run(a):
            return multimodal_objective(
                EmbeddingBatch(a["view_z"]), EmbeddingBatch(a["view_zprime"]),
                EmbeddingBatch(a["image"]), EmbeddingBatch(a["teacher"]),
                cons_pairs, hp)["total"]
        checked = ("view_z", "view_zprime")
    else:
        raise ValueError(f"unknown loss '{loss_name}'")

    if isinstance(checked, dict):
        pairs = list(checked.items())
    else:
        pairs = [(name, name) for name in checked]

    worst = 0.0
    result = run(arrays)
    for array_name, grad_name in pairs:
        analytic = result.grads[grad_name]
        fd = fd_gradient(lambda a: run(a).value, arrays, array_name)
        worst = max(worst, _rel_err(analytic, fd))
    return worst


def check_all(seed: int = 0, n: int = DEFAULT_N, d: int = DEFAULT_D,
              only: str | None = None, hp: Hyperparams | None = None) -> dict:
    names = [only] if only else list(LOSS_NAMES)
    return {name: check_loss(name, seed=seed, n=n, d=d, hp=hp) for name in names}
