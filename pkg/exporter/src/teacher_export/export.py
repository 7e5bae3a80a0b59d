"""Export orchestration: read inputs, run each teacher, write files.

Rows are aligned by input order across every exported file. All
encoding happens before any file is written, so a decode failure
aborts the run without leaving partial outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import DEFAULT_TEACHERS, resolve_encoder
from .errors import UsageError
from .formats import write_embeddings


@dataclass(frozen=True)
class ExportManifest:
    out_dir: Path
    captions_path: Path | None = None
    image_dir: Path | None = None
    teachers: tuple = field(default_factory=lambda: DEFAULT_TEACHERS)
    normalize: bool = True
    backend: str = "hashed"

    def __post_init__(self):
        if self.captions_path is None and self.image_dir is None:
            raise UsageError("need --captions and/or --images")
        if not self.teachers:
            raise UsageError("need at least one teacher")


def read_captions(path) -> list:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines]


def list_images(directory) -> list:
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir() if p.is_file())
    if not paths:
        raise UsageError(f"no image files in {directory}")
    return paths


def _normalize(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    zero = np.where(norms[:, 0] == 0.0)[0]
    if zero.size:
        raise UsageError(f"cannot normalize zero embedding at row {int(zero[0])}")
    return rows / norms


def export_teachers(manifest: ExportManifest) -> dict:
    """Run every requested teacher; returns {teacher id: output path}."""
    captions = read_captions(manifest.captions_path) if manifest.captions_path else None
    images = list_images(manifest.image_dir) if manifest.image_dir else None
    if captions is not None and images is not None and len(captions) != len(images):
        raise UsageError(
            f"caption count {len(captions)} != image count {len(images)}")

    resolved = [resolve_encoder(t, manifest.backend) for t in manifest.teachers]

    exports = []
    for teacher, (spec, encoder) in zip(manifest.teachers, resolved):
        if spec.modality == "image":
            if images is None:
                raise UsageError(f"teacher '{teacher}' needs --images")
            rows = encoder.encode_images(images)
        else:
            if captions is None:
                raise UsageError(f"teacher '{teacher}' needs --captions")
            rows = encoder.encode_texts(captions)
        if manifest.normalize:
            rows = _normalize(rows)
        exports.append((teacher, spec, rows))

    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    manifest_lines = []
    for teacher, spec, rows in exports:
        path = out / f"{teacher}.emb"
        write_embeddings(rows, path, sidecar={
            "model": spec.model_id,
            "dim": spec.dim,
            "count": rows.shape[0],
            "modality": spec.modality,
            "normalized": str(manifest.normalize).lower(),
            "backend": manifest.backend,
        })
        written[teacher] = path
        manifest_lines.append(f"{teacher}={path.name}")
    (out / "manifest.txt").write_text("\n".join(manifest_lines) + "\n",
                                      encoding="utf-8")
    return written
