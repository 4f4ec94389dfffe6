"""Deterministic seed splitting.

Every random stream is derived from a 64-bit master seed plus a tuple of
labels (module name, shard index, threshold index, ...).  The derived seed is
the first 8 bytes of ``blake2b(repr((master, labels)))``, so draws do not
depend on how work is scheduled across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master: int, *labels: object) -> int:
    payload = repr((int(master) & MASK64, tuple(str(x) for x in labels))).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def derive_rng(master: int, *labels: object) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, *labels)))


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return derive_rng(0 if rng is None else int(rng), "default")
