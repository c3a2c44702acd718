"""Counter-based random streams.

Every stochastic routine in the library receives an explicit ``RngStream``.
A stream is identified by a 64-bit seed plus a stream index; the pair maps
onto a disjoint slice of the Philox counter space, so the draw sequence of a
stream never depends on how many other streams exist, on evaluation order,
or on the worker layout. Sampling is always performed centrally (workers
only evaluate already-drawn samples), which makes serial and parallel runs
produce identical sample sets by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = 1 << 64

# Streams are spaced 2^128 counter states apart: far more draws than any
# single stream can consume, so substreams can never collide.
_STREAM_STRIDE_BITS = 128
_SPAWN_FANOUT = 65536


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream addressed by (seed, stream index)."""

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < _U64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream) < 0:
            raise ValueError(f"stream index must be nonnegative, got {self.stream}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        bits = np.random.Philox(key=int(self.seed),
                                counter=int(self.stream) << _STREAM_STRIDE_BITS)
        return np.random.Generator(bits)

    def spawn(self, k: int) -> "RngStream":
        """Derive child stream ``k``; children of distinct parents never collide
        as long as fewer than 65536 children are spawned per stream."""
        if not 0 <= k < _SPAWN_FANOUT:
            raise ValueError(f"spawn index must lie in [0, {_SPAWN_FANOUT}), got {k}")
        return RngStream(self.seed, self.stream * _SPAWN_FANOUT + k + 1)
