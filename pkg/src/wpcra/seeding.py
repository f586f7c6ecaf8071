"""Stable per-purpose random streams derived from one master seed."""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def derive_rng(master_seed: int, purpose: str, *indices) -> np.random.Generator:
    """Generator keyed on ``(master_seed, purpose, *indices)``.

    Streams depend only on the key, never on call order, so serial and
    parallel execution draw identical numbers.
    """
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(_key(purpose), *(_key(i) for i in indices))
    )
    return np.random.Generator(np.random.PCG64(ss))
