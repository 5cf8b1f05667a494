"""Counter-based random streams.

A stream is identified by a root seed and a tuple of keys such as
``("asian", "bqmc", trial, level, "shift")``. Each key tuple maps to its own
``SeedSequence`` spawn key, so a stream never depends on how many other streams
were drawn or in which order.
"""
import zlib

import numpy as np


def _key_int(k):
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("integer stream keys must be nonnegative")
        return int(k)
    # strings: stable 32-bit hash offset past any realistic integer key
    return (1 << 40) + zlib.crc32(str(k).encode())


class Streams:
    """Factory of independent generators keyed by tuples."""

    def __init__(self, seed, prefix=()):
        self.seed = int(seed)
        self.prefix = tuple(_key_int(k) for k in prefix)

    def child(self, *keys):
        s = Streams(self.seed)
        s.prefix = self.prefix + tuple(_key_int(k) for k in keys)
        return s

    def get(self, *keys):
        ss = np.random.SeedSequence(self.seed, spawn_key=self.prefix + tuple(_key_int(k) for k in keys))
        return np.random.Generator(np.random.PCG64(ss))
