"""Deterministic, hierarchically derivable random streams.

Built on numpy's Philox counter-based generator: a stream is identified by
(master seed, derivation key), so independent sub-streams can be derived from
stable labels without coordination and without overlap in practice.
"""

import numpy as np


def _key_part(part):
    if isinstance(part, str):
        # stable, platform-independent mapping of labels to u32 words
        return [b for b in part.encode("utf-8")]
    return [int(part) & 0xFFFFFFFF]


class RngStream:
    def __init__(self, seed, key=()):
        self.seed = int(seed)
        self.key = tuple(key)
        spawn_key = []
        for part in self.key:
            spawn_key.extend(_key_part(part))
        seq = np.random.SeedSequence(self.seed, spawn_key=tuple(spawn_key))
        self.gen = np.random.Generator(np.random.Philox(seq))

    def child(self, *ids):
        """Derive an independent stream keyed by (this stream's key, *ids)."""
        return RngStream(self.seed, self.key + ids)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def permutation(self, n):
        return self.gen.permutation(n)

    def choice(self, n, size=None, replace=True):
        return self.gen.choice(n, size=size, replace=replace)
