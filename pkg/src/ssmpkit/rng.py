"""Counter-based random streams.

A stream is the pair (seed, stream_id).  Its 64-bit key is a SplitMix64-style
hash of the pair; replica ``i`` of a batch gets the key ``mix(key ^ mix(i+1))``
and draw ``k`` of that replica is ``mix(mix(rkey + k*G) ^ rkey)``, so every
draw is a pure function of (seed, stream_id, replica, counter).  Results do
not depend on thread count or on the order in which replicas are run.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer on Python ints (bit-identical to the compiled one)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _check_u64(name, v):
    v = int(v)
    if not 0 <= v <= _MASK:
        raise ValueError(f"{name} must fit in 64 bits, got {v}")
    return v


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", _check_u64("seed", self.seed))
        object.__setattr__(self, "stream_id", _check_u64("stream_id", self.stream_id))

    @property
    def key(self) -> np.uint64:
        k = mix64(mix64(self.seed + _GOLDEN) ^ mix64(self.stream_id * 0xD1B54A32D192ED03 + 1))
        return np.uint64(k)

    def fork(self, sub: int) -> "RngStream":
        """Child stream; distinct ``sub`` values give distinct stream ids."""
        sub = _check_u64("sub", sub)
        return RngStream(self.seed, mix64(self.stream_id ^ mix64((sub + _GOLDEN) & _MASK)))

    def generator(self) -> np.random.Generator:
        # Philox is counter-based too, and stable across numpy versions
        return np.random.Generator(np.random.Philox(key=(self.seed << 64) | self.stream_id))

    def uniforms(self, n: int, replica: int = 0) -> np.ndarray:
        return K.uniform_block(self.key, int(replica), int(n))

    def normals(self, n: int, replica: int = 0) -> np.ndarray:
        return K.normal_block(self.key, int(replica), int(n))


def rng_fork(seed: int, stream_id: int) -> RngStream:
    return RngStream(seed, stream_id)


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")
