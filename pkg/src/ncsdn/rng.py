"""Per-entity random streams derived from one master seed.

Each link, node or traffic source asks for its own stream by name. The
stream is seeded from ``numpy.random.SeedSequence(seed, spawn_key=...)`` so
adding a new entity never shifts the draws of an existing one.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np


def entity_key(name: str) -> int:
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stream(seed: int, name: str) -> random.Random:
    ss = np.random.SeedSequence(int(seed), spawn_key=(entity_key(name),))
    state = ss.generate_state(2, dtype=np.uint64)
    return random.Random(int(state[0]) << 64 | int(state[1]))


class Streams:
    """Lazily created, cached streams keyed by entity name."""

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self._cache: dict[str, random.Random] = {}

    def __getitem__(self, name: str) -> random.Random:
        rng = self._cache.get(name)
        if rng is None:
            rng = self._cache[name] = stream(self.seed, name)
        return rng
