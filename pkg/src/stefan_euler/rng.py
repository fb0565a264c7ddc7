"""Counter-based deterministic random streams.

Every draw is a pure function of (seed, stream_id, counter): the counter is
hashed through the SplitMix64 finalizer, so values do not depend on call
order, scheduling, or worker count.  This is what makes the particle engine
bit-identical for any partitioning of the particle set.

Counter layout per stream:
  - draw block d occupies counters d*4096 .. d*4096+4095 (rejection rounds of
    a single sample consume counters inside the block);
  - the Brownian increment lane starts at 2**40 (counter 2**40 + n for step n).
The two lanes cannot collide for fewer than 2**28 draws per stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_TO_UNIT = 2.0 ** -53

BLOCK = 4096
INCREMENT_LANE = 1 << 40


def _mix_scalar(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def _mix_array(x: np.ndarray) -> np.ndarray:
    x = x + _U_GOLDEN
    x = (x ^ (x >> _U30)) * _U_MIX1
    x = (x ^ (x >> _U27)) * _U_MIX2
    return x ^ (x >> _U31)


def stream_base(seed: int, stream_ids) -> np.ndarray:
    """Per-stream hash state, reusable across counters (the expensive part)."""
    ids = np.asarray(stream_ids, dtype=np.uint64)
    return _mix_array(np.uint64(_mix_scalar(seed & _MASK64)) ^ ids)


def uniforms_from_base(base: np.ndarray, counter) -> np.ndarray:
    """Uniforms in the open interval (0,1), one per base element."""
    c = np.asarray(counter, dtype=np.uint64)
    bits = _mix_array(base ^ c)
    return ((bits >> _U11).astype(np.float64) + 0.5) * _TO_UNIT


def keyed_uniforms(seed: int, stream_ids, counter) -> np.ndarray:
    return uniforms_from_base(stream_base(seed, stream_ids), counter)


def keyed_normals(seed: int, stream_ids, counter) -> np.ndarray:
    """Standard normals via the inverse normal CDF of the keyed uniform."""
    return ndtri(keyed_uniforms(seed, stream_ids, counter))


@dataclass
class RandomStream:
    """A sequential view of one (seed, stream_id) lane.

    `counter` is the index of the next draw block; each scalar draw consumes
    one block, so re-created streams replay identically.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0

    def _base(self) -> int:
        return _mix_scalar(_mix_scalar(self.seed & _MASK64) ^ (self.stream_id & _MASK64))

    def block_uniform(self, block: int, offset: int) -> float:
        """Uniform in (0,1) at a fixed (block, offset) key; does not advance."""
        bits = _mix_scalar(self._base() ^ ((block * BLOCK + offset) & _MASK64))
        return ((bits >> 11) + 0.5) * _TO_UNIT

    def take_blocks(self, n: int) -> int:
        """Reserve n draw blocks, returning the first index."""
        first = self.counter
        self.counter += n
        return first

    def uniform(self) -> float:
        return self.block_uniform(self.take_blocks(1), 0)

    def normal(self) -> float:
        return float(ndtri(self.uniform()))
