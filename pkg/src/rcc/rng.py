"""Deterministic pseudo-random number generation.

Every stochastic choice in this package (weight init, pixel jitter, sensor
noise, epoch shuffling) flows through the xoshiro256** generator so that a
given seed reproduces identical bytes on any platform.  Nothing here depends
on Python's `random` or numpy's generators.

Algorithm constants:

* xoshiro256** step: ``result = rotl64(s1 * 5, 7) * 9`` followed by the
  state update ``t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3;
  s2 ^= t; s3 = rotl64(s3, 45)``.
* Seeding: the four 64-bit state words are the first four outputs of
  splitmix64 applied to the seed (gamma 0x9E3779B97F4A7C15, mix constants
  0xBF58476D1CE4E5B9 and 0x94D049BB133111EB).
* Doubles: ``(x >> 11) * 2**-53`` giving uniforms in [0, 1).
* Normals: Box-Muller on uniform pairs, cosine branch first.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_DOUBLE_SCALE = 2.0 ** -53


def splitmix64(seed: int, count: int) -> list[int]:
    """Return `count` successive splitmix64 outputs for `seed`."""
    x = seed & _MASK
    out = []
    for _ in range(count):
        x = (x + 0x9E3779B97F4A7C15) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


class Xoshiro256StarStar:
    """xoshiro256** stream seeded from a 64-bit integer via splitmix64."""

    def __init__(self, seed: int):
        state = splitmix64(seed, 4)
        if not any(state):
            state[0] = 1  # all-zero state is the one forbidden fixed point
        self._s = state

    def next_uint64(self) -> int:
        s0, s1, s2, s3 = self._s
        r = (s1 * 5) & _MASK
        r = ((((r << 7) | (r >> 57)) & _MASK) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return r

    def fill_uint64(self, count: int) -> np.ndarray:
        """Generate `count` raw outputs as a uint64 array.

        Inlined state update; this loop is the hot path of dataset
        generation.
        """
        s0, s1, s2, s3 = self._s
        out = [0] * count
        for i in range(count):
            r = (s1 * 5) & _MASK
            r = ((((r << 7) | (r >> 57)) & _MASK) * 9) & _MASK
            t = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
            out[i] = r
        self._s = [s0, s1, s2, s3]
        return np.array(out, dtype=np.uint64)

    def next_double(self) -> float:
        return (self.next_uint64() >> 11) * _DOUBLE_SCALE

    def doubles(self, count: int) -> np.ndarray:
        """Uniform float64 samples in [0, 1)."""
        return ((self.fill_uint64(count) >> np.uint64(11))).astype(np.float64) * _DOUBLE_SCALE

    def normals(self, count: int) -> np.ndarray:
        """Standard-normal float64 samples via Box-Muller.

        Uniform pairs are consumed two at a time; for odd `count` the spare
        sine-branch sample is discarded, so consumption is always an even
        number of raw draws.
        """
        pairs = (count + 1) // 2
        u = self.doubles(2 * pairs)
        u1 = u[0::2]
        u2 = u[1::2]
        u1 = np.maximum(u1, _DOUBLE_SCALE)  # avoid log(0)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:count]

    def integers_below(self, bound: int, count: int) -> np.ndarray:
        """Uniform integers in [0, bound) as int64.

        Computed as floor(u * bound) from the 53-bit uniforms; the floor
        map keeps the stream consumption at exactly one draw per value.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        return np.minimum((self.doubles(count) * bound).astype(np.int64), bound - 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = int(self.next_double() * (i + 1))
            if j > i:
                j = i
            items[i], items[j] = items[j], items[i]


def derive_stream_seed(seed: int, index: int) -> int:
    """Per-file stream seed: base seed XOR file index.

    Streams seeded through splitmix64 decorrelate even for adjacent seeds,
    so the XOR keeps derivation order-independent across files.
    """
    return (seed ^ index) & _MASK
