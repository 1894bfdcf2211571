"""Seeded random streams.

All randomness goes through :func:`stream`, which derives an independent
Philox (counter-based) generator from a 64-bit master seed, a purpose name
and optional integer indices.  Two calls with the same arguments always
produce the same sequence, regardless of what else was drawn before.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    seed = int(seed)
    if seed < 0 or seed > _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    entropy = [seed & 0xFFFFFFFF, seed >> 32, _purpose_key(purpose)]
    entropy.extend(int(i) for i in index)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def child_seed(seed: int, purpose: str, *index: int) -> int:
    """A derived 64-bit seed, used to label per-trial records for replay."""
    return int(stream(seed, purpose, *index).integers(0, _MASK64, dtype=np.uint64, endpoint=True))
