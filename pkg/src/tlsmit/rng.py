"""Keyed random streams.

Every random draw in the simulator comes from a Philox (counter-based)
generator keyed by ``(master seed, purpose, indices...)``.  A work item such
as one circuit instance therefore sees the same numbers regardless of how
work is batched or ordered.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "purpose_key"]


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf8"))


def stream(seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, *indices)``."""
    key = (purpose_key(purpose),) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
