"""Seed handling.

Every random draw in the package goes through :func:`make_rng`, which maps a
tuple of non-negative integers (master seed, grid index, replicate index, ...)
to an independent PCG64 stream via :class:`numpy.random.SeedSequence`.  The
stream for a replicate therefore depends only on its key, never on execution
order.
"""

from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, tuple, list, None]


def make_rng(seed: SeedLike = None, *key: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        if key:
            raise ValueError("cannot derive a keyed stream from a Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        if key:
            seed = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
        return np.random.default_rng(seed)
    if seed is None:
        seed = 0
    if isinstance(seed, (tuple, list)):
        entropy = [int(s) for s in seed] + [int(k) for k in key]
    else:
        entropy = [int(seed)] + [int(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def child_seeds(seed: SeedLike, n: int) -> list[np.random.SeedSequence]:
    """``n`` independent seed sequences derived from ``seed``."""
    if isinstance(seed, np.random.Generator):
        return [np.random.SeedSequence(int(x)) for x in seed.integers(0, 2**63 - 1, size=n)]
    if isinstance(seed, np.random.SeedSequence):
        return seed.spawn(n)
    if seed is None:
        seed = 0
    entropy = [int(s) for s in seed] if isinstance(seed, (tuple, list)) else [int(seed)]
    return np.random.SeedSequence(entropy).spawn(n)
