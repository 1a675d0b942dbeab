"""Deterministic seed derivation and seeded sampling helpers.

Every source of randomness in the toolkit is an `numpy.random.Generator`
created from a seed derived here. Sub-seeds are stable hashes of
(master_seed, *labels), so independent stages reproduce bit-identical
results regardless of execution order or parallelism.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *parts: object) -> int:
    """Stable 64-bit sub-seed from a master seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)


def sample_without_replacement(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """First k entries of a Fisher-Yates shuffle of range(n); O(k) swaps."""
    if k < 0 or k > n:
        raise ValueError(f"cannot draw {k} from {n} without replacement")
    idx = np.arange(n, dtype=np.int64)
    for i in range(k):
        j = i + int(rng.integers(0, n - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k].copy()


def permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Full Fisher-Yates permutation of range(n) on the given stream."""
    return sample_without_replacement(rng, n, n)
