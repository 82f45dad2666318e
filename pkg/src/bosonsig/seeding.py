"""Seed derivation.

Every random draw in the package comes from a generator derived from a
master seed plus a tuple of keys (component tags, indices). Derivation is
index-based, so work can be split across processes without changing results.
"""
from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def _key_to_int(key: int | str) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("seed keys must be non-negative")
        return int(key)
    digest = hashlib.blake2b(str(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(master: int, *keys: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=tuple(_key_to_int(k) for k in keys))


def derive_rng(master: int, *keys: int | str) -> np.random.Generator:
    """Counter-based (Philox) generator for ``(master, *keys)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(master, *keys)))


def derive_seed(master: int, *keys: int | str) -> int:
    """A 63-bit integer seed for ``(master, *keys)``."""
    return int(seed_sequence(master, *keys).generate_state(1, np.uint64)[0] >> np.uint64(1))


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
