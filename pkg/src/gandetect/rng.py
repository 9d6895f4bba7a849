"""Seeded, splittable random streams.

A stream is identified by a 64-bit seed plus a path of integer or string
keys. Children are derived from that identity alone, so the numbers an
image receives do not depend on which worker processes it or in what order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def hash_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


class Rng:
    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(key_to_int(k) for k in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys) -> Rng:
        return Rng(self.seed, self.path + tuple(keys))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, scale=1.0, size=None):
        return self.gen.normal(0.0, scale, size)

    def integers(self, low, high, size=None):
        """Integers in [low, high]."""
        return self.gen.integers(low, high, size=size, endpoint=True)

    def permutation(self, n):
        return self.gen.permutation(n)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"
