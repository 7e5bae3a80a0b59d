"""Training loop: mixed alternating schedule over pure-text and
multimodal batches, the composite multimodal objective, checkpointing,
and best-on-dev selection.

Pure-text steps optimize the dropout-view contrastive loss only;
multimodal steps optimize the full weighted objective.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import losses
from .data import MultimodalDataset, SamplerConfig, mixed_schedule, seeded_derangement
from .errors import FormatError, NumericsError, ShapeError
from .losses import Hyperparams, LossResult
from .metrics import alignment_metric, spearman
from .model import Adam, StudentModel
from .seeding import derive_seed, rng_for
from .teachers import (
    TeacherEnsemble,
    combine_teachers,
    pseudo_rank_labels,
    target_distribution,
)
from .tensor import EmbeddingBatch, SimilarityMatrix, cosine_sim_matrix, normalize_rows

CHECKPOINT_MAGIC = b"DALC"
CHECKPOINT_VERSION = 1

LOSS_COLUMNS = ("l_text", "l_info", "l_cons", "l_cma", "l_rank", "l_ima",
                "l_cml", "l_iml", "l_total")


@dataclass(frozen=True)
class TrainConfig:
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    batch_size: int = 128
    learning_rate: float = 1e-3
    steps: int = 2000
    eval_every: int = 125
    seed: int = 0
    dropout: float = 0.1
    hidden_dim: int = 768
    text_dim: int = 768
    shared_dim: int = 256
    init_gain: float = 1.0
    holdout: int = 256
    reduction: str = "sum"
    teacher_weights: tuple | None = None
    reshuffle_per_epoch: bool = False

    def __post_init__(self):
        if self.eval_every < 1:
            raise ShapeError("eval_every must be >= 1")
        if self.steps < 0:
            raise ShapeError("steps must be >= 0")


@dataclass(frozen=True)
class Checkpoint:
    params: dict
    config_text: str
    step: int
    dev_metric: float


def multimodal_objective(view_z: EmbeddingBatch, view_zprime: EmbeddingBatch,
                         image_teacher: EmbeddingBatch, text_teacher: EmbeddingBatch,
                         cons_pairs, hp: Hyperparams,
                         reduction: str = "sum") -> dict:
    """All multimodal loss components on one batch, with gradients folded
    back onto the two student views.

    cons_pairs: (image row, text row, label) triples over batch indices.
    Returns a dict of named LossResults including "total"; every gradient
    map uses the keys "view_z" / "view_zprime".
    """
    n = view_z.n
    q_t2t = target_distribution(text_teacher, hp.tau_dist)
    q_v2v = target_distribution(image_teacher, hp.tau_dist)

    info = losses.loss_multimodal_infonce(view_z, image_teacher, hp.tau, reduction)
    info = LossResult(info.value, {"view_z": info.grads["student"]})

    img_idx = np.array([p[0] for p in cons_pairs], dtype=np.int64)
    txt_idx = np.array([p[1] for p in cons_pairs], dtype=np.int64)
    labels = [p[2] for p in cons_pairs]
    cons_raw = losses.loss_consistency(
        EmbeddingBatch(image_teacher.data[img_idx]),
        EmbeddingBatch(view_z.data[txt_idx]),
        labels, hp.margin_m, reduction)
    folded = np.zeros_like(view_z.data)
    np.add.at(folded, txt_idx, cons_raw.grads["shared_txt"])
    cons = LossResult(cons_raw.value, {"view_z": folded})

    cma = losses.loss_cross_modal_kl(view_z, image_teacher, q_t2t, q_v2v,
                                     hp.tau_dist, reduction)
    cma = LossResult(cma.value, {"view_z": cma.grads["student"]})

    rank_labels = pseudo_rank_labels(text_teacher)
    scores = cosine_sim_matrix(view_z, view_zprime)
    rank_raw = losses.loss_listmle(scores, rank_labels.perms, hp.tau, reduction)
    ga, gb = losses.cosine_backward(rank_raw.grads["student_scores"],
                                    view_z.data, view_zprime.data, scores.data)
    rank = LossResult(rank_raw.value, {"view_z": ga, "view_zprime": gb})

    ima = losses.loss_intra_modal_kl(view_z, view_zprime, q_t2t, hp.tau_dist, reduction)

    cml = losses.loss_cml(cons, cma)
    iml = losses.loss_iml(rank, ima)
    total = losses.loss_total(info, cml, iml, hp.lambda_w, hp.mu_w)
    return {"info": info, "cons": cons, "cma": cma, "rank": rank, "ima": ima,
            "cml": cml, "iml": iml, "total": total}


def _chain_to_params(model: StudentModel, caches_and_grads) -> dict:
    grads: dict = {}
    for cache, g_out in caches_and_grads:
        for k, g in model.backward(cache, g_out).items():
            grads[k] = grads.get(k, 0.0) + g
    return grads


def _check_finite(report: dict):
    for name, value in report.items():
        if not np.isfinite(value):
            raise NumericsError(f"non-finite loss component '{name}': {value}")


def train_step(model: StudentModel, optimizer: Adam, batch: dict,
               config: TrainConfig, step: int) -> dict:
    """One optimizer update; returns the loss decomposition for logging."""
    hp = config.hyperparams
    mask_seed = derive_seed(config.seed, f"masks-{step}")
    report = {c: float("nan") for c in LOSS_COLUMNS}

    if batch["kind"] == "text":
        (za, ca), (zb, cb) = model.forward_two_views(batch["features"], "text", mask_seed)
        res = losses.loss_text_infonce(EmbeddingBatch(za), EmbeddingBatch(zb),
                                       hp.tau, config.reduction)
        grads = _chain_to_params(model, [(ca, res.grads["view_z"]),
                                         (cb, res.grads["view_zprime"])])
        report["l_text"] = res.value
        report["l_total"] = res.value
    else:
        (za, ca), (zb, cb) = model.forward_two_views(batch["features"], "shared", mask_seed)
        comps = multimodal_objective(
            EmbeddingBatch(za), EmbeddingBatch(zb),
            batch["image_teacher"], batch["text_teacher"],
            batch["cons_pairs"], hp, config.reduction)
        total = comps["total"]
        grads = _chain_to_params(model, [(ca, total.grads["view_z"]),
                                         (cb, total.grads["view_zprime"])])
        for key, col in (("info", "l_info"), ("cons", "l_cons"), ("cma", "l_cma"),
                         ("rank", "l_rank"), ("ima", "l_ima"), ("cml", "l_cml"),
                         ("iml", "l_iml"), ("total", "l_total")):
            report[col] = comps[key].value

    _check_finite({k: v for k, v in report.items() if not np.isnan(v)})
    report["grad_norm"] = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    optimizer.step(model.params, grads)
    return report


def _embed(model: StudentModel, features: np.ndarray, head: str = "shared") -> np.ndarray:
    out, _ = model.forward(features, head, mask_rng=None)
    return out


def dev_spearman(model: StudentModel, dataset: MultimodalDataset, idx: np.ndarray) -> float:
    """Spearman between predicted pair cosines and ground-truth latent cosines."""
    emb = normalize_rows(_embed(model, dataset.text_features.data[idx]))
    gold = normalize_rows(dataset.ground_truth_latents.data[idx])
    iu, ju = np.triu_indices(len(idx), k=1)
    pred_sims = (emb[iu] * emb[ju]).sum(axis=1)
    gold_sims = (gold[iu] * gold[ju]).sum(axis=1)
    return spearman(pred_sims, gold_sims)


def dev_alignment(model: StudentModel, dataset: MultimodalDataset, idx: np.ndarray) -> float:
    emb = _embed(model, dataset.text_features.data[idx])
    return alignment_metric(EmbeddingBatch(emb),
                            EmbeddingBatch(dataset.image_teacher.data[idx]))


def combined_text_teacher(dataset: MultimodalDataset,
                          weights: tuple | None = None) -> EmbeddingBatch:
    k = len(dataset.text_teachers)
    if weights is None:
        weights = tuple(1.0 / k for _ in range(k))
    return combine_teachers(TeacherEnsemble(dataset.text_teachers, weights))


def train_loop(model: StudentModel, dataset: MultimodalDataset,
               config: TrainConfig, config_text: str = "") -> tuple:
    """Run the full schedule; returns (best checkpoint, history rows).

    History rows are dicts: step, kind, loss columns, grad_norm and
    (on evaluation steps) dev_spearman / dev_alignment.
    """
    n = dataset.n
    if config.holdout >= n:
        raise ShapeError("holdout must be smaller than the dataset")
    train_idx = np.arange(n - config.holdout)
    dev_idx = np.arange(n - config.holdout, n)

    text_teacher_all = combined_text_teacher(dataset, config.teacher_weights)
    optimizer = Adam(model.params, config.learning_rate)
    bs = config.batch_size
    n_batches = max(1, len(train_idx) // bs)
    sampler = SamplerConfig(ratio_a=1, batch_size=bs, seed=config.seed)

    history = []
    best: Checkpoint | None = None
    step = 0
    epoch = 0

    def evaluate(at_step: int) -> dict:
        nonlocal best
        rho = dev_spearman(model, dataset, dev_idx)
        align = dev_alignment(model, dataset, dev_idx)
        if best is None or rho > best.dev_metric:
            # params are rounded to float32 here so the on-disk checkpoint
            # reproduces this snapshot's forward pass exactly
            snap = {k: v.astype(np.float32).astype(np.float64)
                    for k, v in model.params.items()}
            best = Checkpoint(params=snap, config_text=config_text,
                              step=at_step, dev_metric=rho)
        return {"dev_spearman": rho, "dev_alignment": align}

    while step < config.steps:
        shuffle = rng_for(config.seed, f"epoch-{epoch}").permutation(train_idx)
        text_shuffle = rng_for(config.seed, f"epoch-text-{epoch}").permutation(train_idx)
        schedule = mixed_schedule(n_batches, n_batches, sampler)
        for kind, b in schedule:
            if step >= config.steps:
                break
            if kind == "text":
                idx = text_shuffle[b * bs:(b + 1) * bs]
                batch = {"kind": "text", "features": dataset.text_features.data[idx]}
            else:
                idx = shuffle[b * bs:(b + 1) * bs]
                pair_seed = epoch if config.reshuffle_per_epoch else 0
                sigma = seeded_derangement(
                    len(idx), rng_for(config.seed, f"dprime-{pair_seed}-{b}"))
                cons_pairs = [(i, i, 1) for i in range(len(idx))]
                cons_pairs += [(int(sigma[i]), i, 0) for i in range(len(idx))]
                batch = {
                    "kind": "mm",
                    "features": dataset.text_features.data[idx],
                    "image_teacher": EmbeddingBatch(dataset.image_teacher.data[idx]),
                    "text_teacher": EmbeddingBatch(text_teacher_all.data[idx]),
                    "cons_pairs": cons_pairs,
                }
            report = train_step(model, optimizer, batch, config, step)
            step += 1
            row = {"step": step, "kind": kind, **report}
            if step % config.eval_every == 0:
                row.update(evaluate(step))
            history.append(row)
        epoch += 1

    if config.steps == 0 or config.steps % config.eval_every != 0:
        row = {"step": step, "kind": "eval",
               **{c: float("nan") for c in LOSS_COLUMNS}, "grad_norm": float("nan")}
        row.update(evaluate(step))
        history.append(row)
    return best, history


# ---------------------------------------------------------------------------
# Checkpoint and history serialization


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<Qd", ckpt.step, ckpt.dev_metric))
        cfg = ckpt.config_text.encode("utf-8")
        f.write(struct.pack("<I", len(cfg)))
        f.write(cfg)
        f.write(struct.pack("<I", len(ckpt.params)))
        for name in sorted(ckpt.params):
            arr = ckpt.params[name]
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.astype("<f4").tobytes(order="C"))


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise FormatError(f"{path}: truncated checkpoint")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals

    magic, = take("<4s")
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    version, = take("<I")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    step, dev_metric = take("<Qd")
    cfg_len, = take("<I")
    config_text = raw[off:off + cfg_len].decode("utf-8")
    off += cfg_len
    n_params, = take("<I")
    params = {}
    for _ in range(n_params):
        name_len, = take("<H")
        name = raw[off:off + name_len].decode("utf-8")
        off += name_len
        ndim, = take("<B")
        shape = tuple(take("<I")[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw[off:off + count * 4], dtype="<f4").reshape(shape)
        off += count * 4
        params[name] = arr.astype(np.float64)
    return Checkpoint(params=params, config_text=config_text,
                      step=step, dev_metric=dev_metric)


def history_to_tsv(history: list) -> str:
    cols = ["step", "kind", *LOSS_COLUMNS, "grad_norm", "dev_spearman", "dev_alignment"]
    lines = ["#" + "\t".join(cols)]
    for row in history:
        cells = []
        for c in cols:
            v = row.get(c, "")
            if isinstance(v, float):
                cells.append("" if np.isnan(v) else f"{v:.12g}")
            else:
                cells.append(str(v))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
