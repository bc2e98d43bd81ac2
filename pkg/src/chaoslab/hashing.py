"""Stable, platform-independent hashing used for routing and seed derivation.

The routing hash must reproduce bit-for-bit across runs and implementations,
so we pin FNV-1a 64-bit and fold user ids in as fixed-width little-endian
bytes. Topology documents declare the choice in their header
(``routing_hash: fnv1a-64``).
"""

from __future__ import annotations

import numpy as np

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

ROUTING_HASH_NAME = "fnv1a-64"


def fnv1a64(data: bytes, h: int = FNV64_OFFSET) -> int:
    """FNV-1a over ``data``, continuing from state ``h``."""
    for b in data:
        h = ((h ^ b) * FNV64_PRIME) & _MASK64
    return h


def hash_unit(salt: str, user_id: int) -> float:
    """Map (salt, user_id) to [0, 1) deterministically.

    The salt is digested as UTF-8, then the user id is folded in as its
    8 little-endian bytes so that bulk (vectorized) assignment can compute
    the identical value.
    """
    h = fnv1a64(salt.encode("utf-8"))
    h = fnv1a64((user_id & _MASK64).to_bytes(8, "little"), h)
    return h / 2**64


def hash_unit_many(salt: str, user_ids: np.ndarray) -> np.ndarray:
    """Vectorized twin of :func:`hash_unit` for large user populations."""
    h0 = fnv1a64(salt.encode("utf-8"))
    ids = np.asarray(user_ids, dtype=np.uint64)
    h = np.full(ids.shape, h0, dtype=np.uint64)
    prime = np.uint64(FNV64_PRIME)
    with np.errstate(over="ignore"):
        for byte_index in range(8):
            b = (ids >> np.uint64(8 * byte_index)) & np.uint64(0xFF)
            h = (h ^ b) * prime
    return h.astype(np.float64) / 2.0**64


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer; used to derive independent per-request seeds."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)
