"""Trainable student: a two-layer tanh encoder with inverted dropout and
two projection heads (text space and shared multimodal space), with
hand-written forward/backward passes, plus a small Adam optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .seeding import rng_for


@dataclass
class StudentModel:
    params: dict
    dropout: float = 0.1

    @classmethod
    def init(cls, d_in: int, hidden: int = 768, text_dim: int = 768,
             shared_dim: int = 256, dropout: float = 0.1, seed: int = 0,
             init_gain: float = 1.0) -> "StudentModel":
        if not (0.0 <= dropout < 1.0):
            raise ShapeError("dropout must lie in [0, 1)")
        rng = rng_for(seed, "model-init")

        def affine(fan_in, fan_out, gain):
            w = rng.standard_normal((fan_in, fan_out)) * gain / np.sqrt(fan_in)
            b = rng.standard_normal(fan_out) * 0.1 * gain
            return w, b

        p = {}
        p["enc.w1"], p["enc.b1"] = affine(d_in, hidden, init_gain)
        p["enc.w2"], p["enc.b2"] = affine(hidden, hidden, init_gain)
        p["text.w"], p["text.b"] = affine(hidden, text_dim, 1.0)
        p["shared.w"], p["shared.b"] = affine(hidden, shared_dim, 1.0)
        return cls(params=p, dropout=dropout)

    @property
    def d_in(self) -> int:
        return self.params["enc.w1"].shape[0]

    def _dropout_mask(self, shape, rng) -> np.ndarray:
        if self.dropout == 0.0 or rng is None:
            return np.ones(shape)
        keep = 1.0 - self.dropout
        return (rng.random(shape) < keep).astype(np.float64) / keep

    def forward(self, x: np.ndarray, head: str, mask_rng=None):
        """One forward pass; returns (output, cache for backward).

        mask_rng=None disables dropout (deterministic inference).
        """
        if x.shape[1] != self.d_in:
            raise ShapeError(f"input dim {x.shape[1]} != model dim {self.d_in}")
        if head not in ("text", "shared"):
            raise ShapeError(f"unknown head '{head}'")
        p = self.params
        a1 = x @ p["enc.w1"] + p["enc.b1"]
        t1 = np.tanh(a1)
        m1 = self._dropout_mask(t1.shape, mask_rng)
        h1 = t1 * m1
        a2 = h1 @ p["enc.w2"] + p["enc.b2"]
        t2 = np.tanh(a2)
        m2 = self._dropout_mask(t2.shape, mask_rng)
        h2 = t2 * m2
        out = h2 @ p[f"{head}.w"] + p[f"{head}.b"]
        cache = {"x": x, "t1": t1, "m1": m1, "h1": h1, "t2": t2, "m2": m2,
                 "h2": h2, "head": head}
        return out, cache

    def backward(self, cache: dict, grad_out: np.ndarray) -> dict:
        """Parameter gradients for one cached forward pass."""
        p = self.params
        head = cache["head"]
        grads = {}
        grads[f"{head}.w"] = cache["h2"].T @ grad_out
        grads[f"{head}.b"] = grad_out.sum(axis=0)
        dh2 = grad_out @ p[f"{head}.w"].T
        da2 = dh2 * cache["m2"] * (1.0 - cache["t2"] ** 2)
        grads["enc.w2"] = cache["h1"].T @ da2
        grads["enc.b2"] = da2.sum(axis=0)
        dh1 = da2 @ p["enc.w2"].T
        da1 = dh1 * cache["m1"] * (1.0 - cache["t1"] ** 2)
        grads["enc.w1"] = cache["x"].T @ da1
        grads["enc.b1"] = da1.sum(axis=0)
        return grads

    def forward_two_views(self, x: np.ndarray, head: str, seed: int):
        """Two stochastic passes with independent dropout masks.

        With dropout == 0 the views coincide exactly.
        """
        rng_a = rng_for(seed, "dropout-z") if self.dropout > 0 else None
        rng_b = rng_for(seed, "dropout-zprime") if self.dropout > 0 else None
        out_a, cache_a = self.forward(x, head, rng_a)
        out_b, cache_b = self.forward(x, head, rng_b)
        return (out_a, cache_a), (out_b, cache_b)


class Adam:
    """Classic first-order adaptive-moment optimizer."""

    def __init__(self, params: dict, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        if self.lr == 0.0:
            return
        self.t += 1
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mh = self.m[k] / (1 - self.beta1 ** self.t)
            vh = self.v[k] / (1 - self.beta2 ** self.t)
            params[k] -= self.lr * mh / (np.sqrt(vh) + self.eps)
