"""Deterministic seed derivation.

All randomness in the package flows from one master seed; each subsystem
gets its own stream via labeled hashing, so adding a consumer never
shifts the streams of existing ones.
"""

import hashlib

import numpy as np


def derive_seed(master: int, label: str) -> int:
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, label))
