"""Indexable Gaussian streams on the counter-based Philox generator.

Each :class:`RandomStream` ``(seed, index)`` maps to
``Philox(SeedSequence(seed, spawn_key=(index,)))``, so distinct indices give
statistically independent streams without any shared state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RandomStream", "gaussian_stream"]


@dataclass(frozen=True)
class RandomStream:
    """Stream ``(seed, index)``; ``path`` addresses nested sub-streams.

    Sub-stream ``child(k)`` of ``(seed, index, path)`` uses the spawn key
    ``(index, *path, k)``, so shards of one stream never overlap another
    stream index.
    """

    seed: int
    index: int = 0
    path: tuple = ()

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.index < 0:
            raise ValueError("stream index must be non-negative")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.index, *self.path))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, k: int) -> "RandomStream":
        return RandomStream(self.seed, self.index, (*self.path, int(k)))


def gaussian_stream(stream: RandomStream, count: int) -> np.ndarray:
    """The first ``count`` standard normal draws of ``stream``.

    Draws are produced sequentially, so ``gaussian_stream(s, n)`` is a
    prefix of ``gaussian_stream(s, m)`` whenever ``n <= m``.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    return stream.generator().standard_normal(count)
