"""Seed derivation shared by every stochastic routine.

All randomness flows from a master integer seed plus a tuple of integer keys
(cell index, run batch, ...), so results never depend on scheduling.
"""

from __future__ import annotations

import numpy as np


def derive_rng(master: int, *keys: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(seq)


def as_generator(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return derive_rng(0 if seed is None else seed)


def uniform_open_closed(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform samples on (0, 1]."""
    return 1.0 - rng.random(size)
