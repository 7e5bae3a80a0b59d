"""Command-line entry point.

Subcommands: gen-synth, train, eval, gradcheck. Exit codes are a stable
contract: 0 success, 1 usage/config error, 2 numerical failure, 3 I/O
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import gradcheck as gc
from .data import generate_synthetic, load_embeddings, save_embeddings
from .errors import ConfigError, FormatError, NumericsError, ShapeError
from .losses import Hyperparams
from .metrics import (
    MetricReport,
    alignment_metric,
    export_anisotropy_scatter,
    recall_at_k,
    spearman,
    uniformity_metric,
)
from .model import StudentModel
from .tensor import EmbeddingBatch, cosine_sim_matrix, normalize_rows
from .train import (
    TrainConfig,
    history_to_tsv,
    load_checkpoint,
    save_checkpoint,
    train_loop,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

GRADCHECK_TOL = 1e-5

DATASET_FILES = ("text_features", "image_teacher", "text_teacher_0",
                 "text_teacher_1", "ground_truth")


def _add_override_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key = value config file")
    for key, (typ, _) in cfgmod.SCHEMA.items():
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            parser.add_argument(flag, type=str, default=None, metavar="true|false")
        else:
            parser.add_argument(flag, type=str, default=None)


def _resolve(args) -> dict:
    file_values = cfgmod.parse_config_file(args.config) if args.config else {}
    overrides = {}
    for key in cfgmod.SCHEMA:
        raw = getattr(args, key, None)
        if raw is not None:
            overrides[key] = cfgmod._parse_value(key, raw)
    if getattr(args, "paper_lr", False):
        overrides["learning_rate"] = 2e-5
    return cfgmod.resolve(file_values, overrides)


def _train_config(cfg: dict) -> TrainConfig:
    hp = Hyperparams(tau=cfg["tau"], tau_dist=cfg["tau_dist"],
                     lambda_w=cfg["lambda"], mu_w=cfg["mu"], margin_m=cfg["margin"])
    return TrainConfig(
        hyperparams=hp, batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"], steps=cfg["steps"],
        eval_every=cfg["eval_every"], seed=cfg["seed"], dropout=cfg["dropout"],
        hidden_dim=cfg["hidden_dim"], text_dim=cfg["text_dim"],
        shared_dim=cfg["shared_dim"], init_gain=cfg["init_gain"],
        holdout=cfg["holdout"], reduction=cfg["reduction"],
        reshuffle_per_epoch=cfg["reshuffle_per_epoch"])


def cmd_gen_synth(args) -> int:
    cfg = _resolve(args)
    if cfg["pairs"] < 2:
        raise ConfigError("--pairs must be >= 2 (mismatched pairs need a derangement)")
    out = Path(cfg["data_dir"])
    out.mkdir(parents=True, exist_ok=True)
    ds = generate_synthetic(
        n_pairs=cfg["pairs"], latent_dim=cfg["latent_dim"],
        noise_cmb=cfg["noise_cmb"], noise_isd=cfg["noise_isd"],
        captions_per_image=cfg["captions_per_image"], seed=cfg["seed"],
        feature_dim=cfg["feature_dim"], image_dim=cfg["image_dim"],
        text_teacher_dim=cfg["text_teacher_dim"])
    batches = {
        "text_features": ds.text_features,
        "image_teacher": ds.image_teacher,
        "text_teacher_0": ds.text_teachers[0],
        "text_teacher_1": ds.text_teachers[1],
        "ground_truth": ds.ground_truth_latents,
    }
    manifest = []
    for name, batch in batches.items():
        path = out / f"{name}.emb"
        save_embeddings(batch, path, sidecar={
            "source": name, "normalized": str(batch.normalized).lower(),
            "seed": cfg["seed"]})
        manifest.append(f"{name}={path.name}")
    manifest.append(f"seed={cfg['seed']}")
    manifest.append(f"pairs={cfg['pairs']}")
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    print(f"wrote {len(batches)} embedding files + manifest to {out}")
    return EXIT_OK


def _load_dataset(data_dir: Path):
    from .data import MultimodalDataset

    manifest_path = data_dir / "manifest.txt"
    if not manifest_path.exists():
        raise FormatError(f"missing manifest: {manifest_path}")
    entries = {}
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    missing = [n for n in DATASET_FILES if n not in entries]
    if missing:
        raise FormatError(f"manifest missing entries: {missing}")
    loaded = {n: load_embeddings(data_dir / entries[n]) for n in DATASET_FILES}
    return MultimodalDataset(
        text_features=loaded["text_features"],
        image_teacher=loaded["image_teacher"],
        text_teachers=(loaded["text_teacher_0"], loaded["text_teacher_1"]),
        ground_truth_latents=loaded["ground_truth"])


def cmd_train(args) -> int:
    cfg = _resolve(args)
    dataset = _load_dataset(Path(cfg["data_dir"]))
    tc = _train_config(cfg)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    config_text = cfgmod.to_text(cfg)
    (out / "resolved.cfg").write_text(config_text, encoding="utf-8")
    print("resolved config:")
    print(config_text, end="")

    model = StudentModel.init(
        d_in=dataset.text_features.d, hidden=tc.hidden_dim, text_dim=tc.text_dim,
        shared_dim=tc.shared_dim, dropout=tc.dropout, seed=tc.seed,
        init_gain=tc.init_gain)
    best, history = train_loop(model, dataset, tc, config_text=config_text)
    save_checkpoint(best, out / "checkpoint.dalc")
    (out / "history.tsv").write_text(history_to_tsv(history), encoding="utf-8")

    last_mm = next((r for r in reversed(history) if r["kind"] == "mm"), None)
    print("\nfinal loss decomposition:")
    if last_mm is None:
        print("  (no multimodal steps were taken)")
    else:
        for col in ("l_info", "l_cons", "l_cma", "l_rank", "l_ima",
                    "l_cml", "l_iml", "l_total"):
            print(f"  {col:8s} {last_mm[col]:.6f}")
    print(f"\nbest checkpoint: step {best.step}, dev spearman {best.dev_metric:.4f}")
    return EXIT_OK


def _report_lines(report: MetricReport) -> list:
    lines = [f"spearman_x100\t{report.spearman * 100:.9g}",
             f"alignment\t{report.alignment:.9g}",
             f"uniformity\t{report.uniformity:.9g}"]
    for k in sorted(report.recall_at):
        fwd, bwd = report.recall_at[k]
        lines.append(f"recall_at_{k}_fwd\t{fwd:.9g}")
        lines.append(f"recall_at_{k}_bwd\t{bwd:.9g}")
    return lines


def _eval_batches(pred: EmbeddingBatch, pos: EmbeddingBatch, gold_sims, out: Path):
    sim = cosine_sim_matrix(pred, pos)
    pn = normalize_rows(pred.data)
    iu, ju = np.triu_indices(pred.n, k=1)
    pred_pair = (pn[iu] * pn[ju]).sum(axis=1)
    rho = spearman(pred_pair, gold_sims)
    recall = {k: recall_at_k(sim, k) for k in (1, 5) if k <= pred.n}
    report = MetricReport(
        spearman=rho,
        alignment=alignment_metric(pred, pos),
        uniformity=uniformity_metric(pred),
        recall_at=recall)
    out.mkdir(parents=True, exist_ok=True)
    lines = _report_lines(report)
    (out / "report.tsv").write_text(
        "#metric\tvalue\n" + "\n".join(lines) + "\n", encoding="utf-8")
    export_anisotropy_scatter(
        list(zip(pred_pair.tolist(), np.asarray(gold_sims).tolist())),
        out / "scatter.tsv")
    print("\n".join(lines))
    return report


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    out = Path(cfg["out_dir"])

    if args.pred:
        # direct embedding-file mode: no checkpoint involved
        pred = load_embeddings(args.pred)
        pos = load_embeddings(args.pos) if args.pos else pred
        pn = normalize_rows(pos.data)
        iu, ju = np.triu_indices(pos.n, k=1)
        gold = (pn[iu] * pn[ju]).sum(axis=1)
        _eval_batches(pred, pos, gold, out)
        return EXIT_OK

    dataset = _load_dataset(Path(cfg["data_dir"]))
    holdout = cfg["holdout"]
    idx = np.arange(dataset.n - holdout, dataset.n)
    gold = normalize_rows(dataset.ground_truth_latents.data[idx])
    iu, ju = np.triu_indices(len(idx), k=1)
    gold_sims = (gold[iu] * gold[ju]).sum(axis=1)

    if args.use_ground_truth:
        pred = EmbeddingBatch(dataset.ground_truth_latents.data[idx])
    else:
        ckpt = load_checkpoint(out / "checkpoint.dalc" if args.checkpoint is None
                               else args.checkpoint)
        model = StudentModel(params=dict(ckpt.params), dropout=0.0)
        if model.d_in != dataset.text_features.d:
            raise ShapeError(
                f"checkpoint input dim {model.d_in} != dataset feature dim "
                f"{dataset.text_features.d}")
        emb, _ = model.forward(dataset.text_features.data[idx], "shared", None)
        pred = EmbeddingBatch(emb)
    pos = EmbeddingBatch(dataset.image_teacher.data[idx])
    if pred.d != pos.d:
        pos = pred  # ground-truth mode: no comparable positive space
    _eval_batches(pred, pos, gold_sims, out)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _resolve(args)
    hp = Hyperparams(tau=cfg["tau"], tau_dist=cfg["tau_dist"],
                     lambda_w=cfg["lambda"], mu_w=cfg["mu"], margin_m=cfg["margin"])
    only = args.loss
    if only is not None and only not in gc.LOSS_NAMES:
        raise ConfigError(f"unknown loss '{only}'; choose from {gc.LOSS_NAMES}")
    results = gc.check_all(seed=cfg["seed"], only=only, hp=hp)
    failed = []
    print(f"{'loss':20s} {'max rel err':>12s}")
    for name, err in results.items():
        status = "ok" if err < GRADCHECK_TOL else "FAIL"
        print(f"{name:20s} {err:12.3e}  {status}")
        if err >= GRADCHECK_TOL:
            failed.append(name)
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}")
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualign",
        description="Dual-level alignment objective engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    _add_override_flags(p_gen)
    p_gen.add_argument("--out", dest="data_dir", type=str, default=None,
                       help="alias for --data-dir")
    p_gen.set_defaults(func=cmd_gen_synth)

    p_train = sub.add_parser("train", help="train the student model")
    _add_override_flags(p_train)
    p_train.add_argument("--paper-lr", action="store_true",
                         help="use the documented fine-tuning learning rate 2e-5")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint or embedding files")
    _add_override_flags(p_eval)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--pred", default=None, help="embedding file to evaluate directly")
    p_eval.add_argument("--pos", default=None, help="positive-pair embedding file")
    p_eval.add_argument("--use-ground-truth", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    _add_override_flags(p_gc)
    p_gc.add_argument("--loss", default=None)
    p_gc.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericsError,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ShapeError as exc:
        print(f"shape error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
