"""Teacher encoders.

Two backend families:

- "hashed": a dependency-free, fully deterministic stand-in. Captions
  are embedded by averaging seeded random vectors hashed from their
  tokens; images by projecting simple pixel statistics through a fixed
  seeded matrix. Useful for pipeline validation and offline testing.
- "transformers": the real pretrained models (a CLIP-style dual image
  encoder and two sentence encoders), loaded lazily. Requires torch +
  transformers and downloadable weights; any load failure surfaces as
  ModelLoadError.

Both are inference-only and deterministic for fixed inputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DecodeError, ModelLoadError, UsageError
from .images import decode_image


@dataclass(frozen=True)
class TeacherSpec:
    model_id: str      # identifier recorded in the sidecar
    dim: int           # native embedding dimension
    modality: str      # "image" or "text"


# Native dimensions: 512 for the dual encoder's shared image-text space,
# 768 for the BERT-base sentence encoders.
TEACHERS = {
    "clip-vit-b32": TeacherSpec("openai/clip-vit-base-patch32", 512, "image"),
    "simcse-bert-base": TeacherSpec(
        "princeton-nlp/unsup-simcse-bert-base-uncased", 768, "text"),
    "diffcse-bert-base": TeacherSpec(
        "voidism/diffcse-bert-base-uncased-sts", 768, "text"),
}

DEFAULT_TEACHERS = tuple(TEACHERS)

_HISTOGRAM_BINS = 16


def _seed_from(salt: str, token: str) -> int:
    digest = hashlib.sha256(f"{salt}\x00{token}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class HashedTextEncoder:
    def __init__(self, dim: int, salt: str):
        self.dim = dim
        self.salt = salt

    def encode_texts(self, captions: list) -> np.ndarray:
        out = np.zeros((len(captions), self.dim))
        for row, caption in enumerate(captions):
            tokens = caption.split()
            if not tokens:
                raise DecodeError(f"caption row {row}: empty after trimming")
            for pos, token in enumerate(tokens):
                rng = np.random.default_rng(_seed_from(self.salt, token.lower()))
                # mild positional damping so word order matters a little
                out[row] += rng.standard_normal(self.dim) / (1.0 + 0.1 * pos)
            out[row] /= len(tokens)
        return out


class HashedImageEncoder:
    def __init__(self, dim: int, salt: str):
        self.dim = dim
        rng = np.random.default_rng(_seed_from(salt, "projection"))
        n_stats = 3 * (2 + _HISTOGRAM_BINS) + 2  # per-channel mean/std + hist, h/w
        self._proj = rng.standard_normal((n_stats, dim)) / np.sqrt(n_stats)

    def _stats(self, pixels: np.ndarray) -> np.ndarray:
        h, w, c = pixels.shape
        if c == 1:
            pixels = np.repeat(pixels, 3, axis=2)
        feats = []
        for ch in range(3):
            plane = pixels[:, :, ch].ravel()
            hist, _ = np.histogram(plane, bins=_HISTOGRAM_BINS, range=(0.0, 1.0))
            feats.extend([plane.mean(), plane.std()])
            feats.extend(hist / plane.size)
        feats.extend([np.log1p(h), np.log1p(w)])
        return np.array(feats)

    def encode_images(self, paths: list) -> np.ndarray:
        out = np.zeros((len(paths), self.dim))
        for row, path in enumerate(paths):
            try:
                pixels = decode_image(path)
            except DecodeError as exc:
                raise DecodeError(f"image row {row}: {exc}") from exc
            out[row] = self._stats(pixels) @ self._proj
        return out


class TransformersTextEncoder:
    def __init__(self, spec: TeacherSpec):
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ModelLoadError(
                f"backend 'transformers' needs torch + transformers: {exc}") from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(spec.model_id)
            self.model = AutoModel.from_pretrained(spec.model_id).eval()
        except Exception as exc:
            raise ModelLoadError(f"could not load '{spec.model_id}': {exc}") from exc

    def encode_texts(self, captions: list) -> np.ndarray:
        import torch

        with torch.no_grad():
            enc = self.tokenizer(captions, padding=True, truncation=True,
                                 return_tensors="pt")
            out = self.model(**enc)
        # [CLS] pooling, the convention of both sentence encoders
        return out.last_hidden_state[:, 0].numpy().astype(np.float64)


class TransformersImageEncoder:
    def __init__(self, spec: TeacherSpec):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadError(
                f"backend 'transformers' needs torch + transformers: {exc}") from exc
        try:
            self.processor = CLIPProcessor.from_pretrained(spec.model_id)
            self.model = CLIPModel.from_pretrained(spec.model_id).eval()
        except Exception as exc:
            raise ModelLoadError(f"could not load '{spec.model_id}': {exc}") from exc

    def encode_images(self, paths: list) -> np.ndarray:
        import torch

        images = [(decode_image(p) * 255).astype(np.uint8) for p in paths]
        with torch.no_grad():
            inputs = self.processor(images=list(images), return_tensors="pt")
            feats = self.model.get_image_features(**inputs)
        return feats.numpy().astype(np.float64)


def resolve_encoder(teacher: str, backend: str):
    """Return (spec, encoder) for a teacher id and backend family."""
    if teacher not in TEACHERS:
        raise UsageError(f"unknown teacher '{teacher}'; choose from {sorted(TEACHERS)}")
    spec = TEACHERS[teacher]
    if backend == "hashed":
        if spec.modality == "image":
            return spec, HashedImageEncoder(spec.dim, salt=teacher)
        return spec, HashedTextEncoder(spec.dim, salt=teacher)
    if backend == "transformers":
        if spec.modality == "image":
            return spec, TransformersImageEncoder(spec)
        return spec, TransformersTextEncoder(spec)
    raise UsageError(f"unknown backend '{backend}'; choose 'hashed' or 'transformers'")
