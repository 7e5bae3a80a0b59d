"""Minimal binary PPM (P6) / PGM (P5) decoding.

Kept dependency-free on purpose: the exporter only needs deterministic
pixel access, and these two formats cover the test corpus. Anything
else is a decode error.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DecodeError


def _read_header_tokens(raw: bytes, count: int):
    """Read `count` whitespace-separated tokens, skipping '#' comments.

    Returns (tokens, offset of the first payload byte).
    """
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(raw):
            raise ValueError("truncated header")
        c = raw[i:i + 1]
        if c == b"#":
            while i < len(raw) and raw[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            start = i
            while i < len(raw) and not raw[i:i + 1].isspace():
                i += 1
            tokens.append(raw[start:i])
    return tokens, i + 1  # single whitespace byte separates header and payload


def decode_image(path) -> np.ndarray:
    """Decode to an (h, w, channels) float array in [0, 1]."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        tokens, offset = _read_header_tokens(raw, 4)
        magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
        if magic not in (b"P5", b"P6"):
            raise ValueError(f"unsupported magic {magic!r}")
        if not (0 < maxval < 256):
            raise ValueError(f"unsupported maxval {maxval}")
        channels = 3 if magic == b"P6" else 1
        count = w * h * channels
        payload = raw[offset:offset + count]
        if len(payload) != count:
            raise ValueError(f"payload is {len(payload)} bytes, expected {count}")
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
        return pixels.reshape(h, w, channels) / maxval
    except ValueError as exc:
        raise DecodeError(f"{path}: {exc}") from exc
