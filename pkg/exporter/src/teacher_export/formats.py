"""Binary embedding file writer.

The layout is an independent implementation of the training engine's
embedding format and must stay byte-identical to it: a packed header
(magic, version, dtype code, row count, column count; little-endian)
followed by row-major little-endian float32 data, plus an optional
`key=value` text sidecar at `<path>.meta`.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"DALR"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0

_HEADER = struct.Struct("<4sIBQI")  # magic, version, dtype code, n, d


def write_embeddings(data: np.ndarray, path, sidecar: dict | None = None) -> None:
    """Write a 2-D array as float32 with header; optionally a sidecar."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {data.shape}")
    n, d = data.shape
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_FLOAT32, n, d))
        f.write(data.astype("<f4").tobytes(order="C"))
    if sidecar is not None:
        lines = [f"{k}={v}" for k, v in sidecar.items()]
        Path(str(path) + ".meta").write_text("\n".join(lines) + "\n", encoding="utf-8")
