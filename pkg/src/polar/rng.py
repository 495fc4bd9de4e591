"""Deterministic RNG stream derivation.

Every stochastic component draws from a generator keyed by the master seed
plus a string path identifying the consumer (e.g. ``"u17/Toxicity"`` or
``("bootstrap", 412)``).  Streams are therefore independent of execution
order and worker count: any parallel schedule reproduces the same numbers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *parts) -> int:
    """Mix a master seed and a key path into a 64-bit stream seed."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode("ascii"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def rng_from_key(master_seed: int, *parts) -> np.random.Generator:
    """Generator seeded deterministically from (master_seed, *parts)."""
    return np.random.default_rng(derive_seed(master_seed, *parts))
