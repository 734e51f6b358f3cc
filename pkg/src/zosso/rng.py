"""Seeded, named random streams.

Every run derives all of its randomness from one 64-bit seed. Each named
stream gets its own Philox (counter-based) generator keyed by
``(seed, stream index)``, so drawing more directions never perturbs the
noise sequence and vice versa.
"""

from __future__ import annotations

import numpy as np

STREAMS = ("directions", "noise", "summary", "diagnostics")


def _generator(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


class RandomStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams = {name: _generator(self.seed, idx) for idx, name in enumerate(STREAMS)}

    def __getitem__(self, name: str) -> np.random.Generator:
        return self._streams[name]

    @property
    def directions(self) -> np.random.Generator:
        return self._streams["directions"]

    @property
    def noise(self) -> np.random.Generator:
        return self._streams["noise"]

    def counter(self, name: str, index: int) -> np.random.Generator:
        """Independent generator for the ``index``-th draw of a named stream."""
        return _generator(self.seed, STREAMS.index(name), 1 + int(index))

    def replicate(self, index: int) -> RandomStreams:
        """Fully isolated streams for replicate ``index`` of this seed."""
        child = RandomStreams.__new__(RandomStreams)
        child.seed = self.seed
        child._streams = {
            name: _generator(self.seed, idx, 0, int(index)) for idx, name in enumerate(STREAMS)
        }
        return child
