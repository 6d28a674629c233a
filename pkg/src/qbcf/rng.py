"""Deterministic, splittable random streams.

Every sampler in this package draws from a :class:`RandomStream`, a thin
wrapper around numpy's counter-based Philox bit generator.  A stream is fully
determined by its ``(seed, stream_id)`` key plus an optional derivation path,
so any unit of work (a Monte Carlo replication, a bootstrap replication, a
Gibbs chain) can own an independent stream and produce bit-identical output
regardless of scheduling or worker count.

Derivation rule
---------------
``RandomStream(seed, stream_id)`` seeds Philox through
``SeedSequence(seed, spawn_key=(stream_id,))``.  ``substream(*indices)``
extends the spawn key, i.e. ``base.substream(b)`` corresponds to
``SeedSequence(seed, spawn_key=(stream_id, b))``.  SeedSequence hashes the
spawn key into the Philox key, which is the documented numpy mechanism for
generating statistically independent parallel streams.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RandomStream"]


class RandomStream:
    """A reproducible random stream keyed by (seed, stream_id [, path])."""

    __slots__ = ("seed", "stream_id", "path", "_gen")

    def __init__(self, seed, stream_id=0, path=()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(k) for k in path)
        self._gen = None

    @property
    def gen(self) -> np.random.Generator:
        """The underlying numpy Generator (created lazily, then stateful)."""
        if self._gen is None:
            ss = np.random.SeedSequence(
                self.seed, spawn_key=(self.stream_id,) + self.path
            )
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def substream(self, *indices) -> "RandomStream":
        """Derive an independent child stream; does not advance this stream."""
        return RandomStream(self.seed, self.stream_id, self.path + tuple(indices))

    def __repr__(self):
        tail = f", path={self.path}" if self.path else ""
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}{tail})"
