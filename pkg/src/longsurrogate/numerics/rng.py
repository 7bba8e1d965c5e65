"""Seedable, splittable random streams."""

import numpy as np

from ..errors import ArgumentError

_BIT_GENERATORS = {
    "philox": np.random.Philox,
    "pcg64": np.random.PCG64,
}


class RandomStream:
    """A reproducible random stream with indexed substreams.

    Substreams derive from the parent seed through ``numpy.random.SeedSequence``
    spawn keys, so ``stream.substream(3)`` is the same sequence no matter
    how many other substreams were requested or in which order.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    algorithm : {"philox", "pcg64"}
        Bit generator. Philox is counter based and the default.
    """

    def __init__(self, seed, algorithm="philox", _key=()):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ArgumentError("seed must be an unsigned 64-bit integer",
                                module="numerics")
        if algorithm not in _BIT_GENERATORS:
            raise ArgumentError(f"unknown RNG algorithm {algorithm!r}",
                                module="numerics")
        self.seed = seed
        self.algorithm = algorithm
        self.key = tuple(int(k) for k in _key)
        self._generator = None

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, algorithm={self.algorithm!r}, key={self.key})"

    @property
    def generator(self):
        """The lazily created ``numpy.random.Generator`` for this stream."""
        if self._generator is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
            self._generator = np.random.Generator(_BIT_GENERATORS[self.algorithm](ss))
        return self._generator

    def substream(self, *index):
        """Independent child stream addressed by a tuple of indices."""
        return RandomStream(self.seed, self.algorithm, self.key + tuple(index))


def as_stream(seed_or_stream, algorithm="philox"):
    """Accept either a seed or an existing stream."""
    if isinstance(seed_or_stream, RandomStream):
        return seed_or_stream
    return RandomStream(seed_or_stream, algorithm)
