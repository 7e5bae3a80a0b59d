"""Data plumbing: the on-disk embedding format, synthetic dataset
generation with controllable misalignment noise, shuffled-pair
construction for the consistency task, and the mixed alternating
batch schedule.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError
from .seeding import rng_for
from .tensor import EmbeddingBatch, normalize_rows

MAGIC = b"DALR"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0

_HEADER = struct.Struct("<4sIBQI")  # magic, version, dtype code, n, d

# Fixed std of the iid feature noise added to student inputs and text
# teachers; the controllable knobs are noise_cmb / noise_isd.
FEATURE_NOISE_STD = 0.05


def save_embeddings(batch: EmbeddingBatch, path, sidecar: dict | None = None) -> None:
    """Write a batch as float32, little-endian, row-major, with header."""
    path = Path(path)
    payload = batch.data.astype("<f4").tobytes(order="C")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_FLOAT32, batch.n, batch.d))
        f.write(payload)
    if sidecar is not None:
        lines = [f"{k}={v}" for k, v in sidecar.items()]
        Path(str(path) + ".meta").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings(path) -> EmbeddingBatch:
    """Read and validate an embedding file; returns float64 in memory."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, dtype, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    expected = n * d * 4
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(n, d).astype(np.float64)
    return EmbeddingBatch(data)


def load_sidecar(path) -> dict:
    meta = {}
    for line in Path(str(path) + ".meta").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        meta[key] = value
    return meta


@dataclass(frozen=True)
class MultimodalDataset:
    """Positionally aligned image-text pairs plus frozen teacher features."""

    text_features: EmbeddingBatch
    image_teacher: EmbeddingBatch
    text_teachers: tuple
    ground_truth_latents: EmbeddingBatch | None = None

    def __post_init__(self):
        n = self.text_features.n
        batches = [self.image_teacher, *self.text_teachers]
        if self.ground_truth_latents is not None:
            batches.append(self.ground_truth_latents)
        for b in batches:
            if b.n != n:
                raise ShapeError("all dataset batches must share the same row count")
        object.__setattr__(self, "text_teachers", tuple(self.text_teachers))

    @property
    def n(self) -> int:
        return self.text_features.n


@dataclass(frozen=True)
class SamplerConfig:
    ratio_a: int = 1
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.ratio_a < 1:
            raise ShapeError("ratio_a must be >= 1")
        if self.batch_size < 2:
            raise ShapeError("batch_size must be >= 2")


def generate_synthetic(n_pairs: int, latent_dim: int, noise_cmb: float = 0.0,
                       noise_isd: float = 0.0, captions_per_image: int = 1,
                       seed: int = 0, feature_dim: int = 64,
                       image_dim: int = 256, text_teacher_dim: int = 768,
                       n_text_teachers: int = 2, nuisance_amp: float = 2.5) -> MultimodalDataset:
    """Build a synthetic multimodal dataset driven entirely by `seed`.

    Each pair gets a latent u ~ N(0, I). The image teacher sees
    normalize(A u + noise_cmb * (R r)) where R r is a low-rank redundancy
    component (shared image structure unrelated to the caption). Text
    teachers see normalize(B_k u + eps); student inputs are
    C u + nuisance_amp * D w + eps, where D w is a structured clutter
    component living in a subspace linearly separable from C's image:
    raw feature cosines are dominated by the clutter (so an untrained
    encoder carries almost no latent signal), while a trained encoder
    can project it out. Extra captions of one image reuse its latent
    plus an offset of magnitude noise_isd.
    """
    if n_pairs < 2:
        raise ShapeError("need at least 2 pairs")
    if latent_dim < 1 or feature_dim < 1:
        raise ShapeError("degenerate dimensions")
    if noise_cmb < 0 or noise_isd < 0:
        raise ShapeError("noise levels must be non-negative")
    if captions_per_image < 1:
        raise ShapeError("captions_per_image must be >= 1")

    rng = rng_for(seed, "synthetic")
    a_map = rng.standard_normal((latent_dim, image_dim)) / np.sqrt(latent_dim)
    b_maps = [rng.standard_normal((latent_dim, text_teacher_dim)) / np.sqrt(latent_dim)
              for _ in range(n_text_teachers)]
    c_map = rng.standard_normal((latent_dim, feature_dim)) / np.sqrt(latent_dim)
    redundancy_dim = max(2, latent_dim // 4)
    r_map = rng.standard_normal((redundancy_dim, image_dim)) / np.sqrt(redundancy_dim)

    u_img = rng.standard_normal((n_pairs, latent_dim))
    if captions_per_image > 1:
        offsets = rng.standard_normal((n_pairs, captions_per_image, latent_dim))
        offsets[:, 0, :] = 0.0  # first caption sits exactly at the image latent
        u_txt = (u_img[:, None, :] + noise_isd * offsets).reshape(-1, latent_dim)
        img_rows = np.repeat(np.arange(n_pairs), captions_per_image)
    else:
        u_txt = u_img
        img_rows = np.arange(n_pairs)
    n_total = u_txt.shape[0]

    redundancy = rng.standard_normal((n_pairs, redundancy_dim)) @ r_map
    img = normalize_rows(u_img @ a_map + noise_cmb * redundancy)[img_rows]

    teachers = []
    for b_map in b_maps:
        eps = rng.standard_normal((n_total, text_teacher_dim)) * FEATURE_NOISE_STD
        teachers.append(EmbeddingBatch(normalize_rows(u_txt @ b_map + eps), normalized=True))

    nuisance_dim = latent_dim
    d_map = rng.standard_normal((nuisance_dim, feature_dim)) / np.sqrt(nuisance_dim)
    w = rng.standard_normal((n_total, nuisance_dim))
    feat_eps = rng.standard_normal((n_total, feature_dim)) * FEATURE_NOISE_STD
    features = u_txt @ c_map + nuisance_amp * (w @ d_map) + feat_eps

    return MultimodalDataset(
        text_features=EmbeddingBatch(features),
        image_teacher=EmbeddingBatch(img, normalized=True),
        text_teachers=tuple(teachers),
        ground_truth_latents=EmbeddingBatch(u_txt),
    )


def seeded_derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random permutation with no fixed points (rejection sampling)."""
    if n < 2:
        raise ShapeError("no derangement exists for n < 2")
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == np.arange(n)):
            return perm


def build_shuffled_pairs(dataset_n: int, seed: int) -> list:
    """Consistency-task examples: one aligned and one deranged pair per item.

    Returns (image index, text index, label) triples with a 1:1
    positive:negative ratio.
    """
    if dataset_n < 2:
        raise ShapeError("need at least 2 pairs to build mismatches")
    sigma = seeded_derangement(dataset_n, rng_for(seed, "shuffled-pairs"))
    pairs = [(i, i, 1) for i in range(dataset_n)]
    pairs += [(int(sigma[i]), i, 0) for i in range(dataset_n)]
    return pairs


def mixed_schedule(n_text_batches: int, n_mm_batches: int, config: SamplerConfig) -> list:
    """Epoch schedule: `ratio_a` text batches, then one multimodal batch,
    repeating; leftovers of either kind are appended in order.

    Returns descriptors ("text", i) / ("mm", j) covering every batch
    exactly once.
    """
    if n_text_batches < 1 or n_mm_batches < 1:
        raise ShapeError("need at least one batch of each kind")
    schedule = []
    t = m = 0
    while t < n_text_batches and m < n_mm_batches:
        for _ in range(config.ratio_a):
            if t >= n_text_batches:
                break
            schedule.append(("text", t))
            t += 1
        if m < n_mm_batches:
            schedule.append(("mm", m))
            m += 1
    schedule += [("text", i) for i in range(t, n_text_batches)]
    schedule += [("mm", j) for j in range(m, n_mm_batches)]
    return schedule
