"""Small helpers shared across modules (seeding, read-only arrays)."""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded PCG64 generator; ``stream`` ints select independent substreams."""
    entropy = [int(seed) & SEED_MASK, *(int(s) & SEED_MASK for s in stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def frozen(a, dtype=None) -> np.ndarray:
    """Return a read-only copy of ``a``."""
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out
