"""Seeded random streams.

The generator is xoshiro256** (Blackman & Vigna) with its 256-bit state filled
by four successive splitmix64 outputs of the 64-bit seed. Both algorithms are
fixed so that streams can be reproduced from any language:

    splitmix64:  x += 0x9E3779B97F4A7C15
                 z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB
                 out = z ^ (z >> 31)

    xoshiro256**: out = rotl(s1 * 5, 7) * 9
                  t = s1 << 17
                  s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3
                  s2 ^= t; s3 = rotl(s3, 45)

Doubles are ``(out >> 11) * 2**-53`` (53 random mantissa bits, in [0, 1)).
Normals use the Box-Muller transform on two consecutive doubles, returning the
cosine branch first and caching the sine branch.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step. Returns (new_state, output)."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Mix a seed with a path of integers into an independent 64-bit seed."""
    x = seed & _MASK
    for p in path:
        x, out = splitmix64(x ^ (p & _MASK))
        x = out
    return x


class Rng:
    """xoshiro256** stream. Identical seeds give identical streams."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK
        x = self.seed
        s = []
        for _ in range(4):
            x, out = splitmix64(x)
            s.append(out)
        self._s = s
        self._spare: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        r = (s1 * 5) & _MASK
        r = ((r << 7) | (r >> 57)) & _MASK
        out = (r * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return out

    def random(self, size: int | tuple[int, ...] | None = None) -> float | np.ndarray:
        """Uniform doubles in [0, 1)."""
        if size is None:
            return (self.next_u64() >> 11) * _INV_2_53
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        raw = np.asarray(self._bulk(n), dtype=np.uint64) >> np.uint64(11)
        return (raw.astype(np.float64) * _INV_2_53).reshape(shape)

    def _bulk(self, n: int) -> list[int]:
        """n consecutive outputs; same stream as repeated next_u64 calls."""
        s0, s1, s2, s3 = self._s
        M = _MASK
        out = [0] * n
        for i in range(n):
            r = (s1 * 5) & M
            out[i] = ((((r << 7) | (r >> 57)) & M) * 9) & M
            t = (s1 << 17) & M
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & M
        self._s = [s0, s1, s2, s3]
        return out

    def uniform(self, low: float, high: float, size=None):
        u = self.random(size)
        return low + (high - low) * u

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        if size is None:
            return loc + scale * self._std_normal()
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        vals = [self._std_normal() for _ in range(n)]
        return loc + scale * np.asarray(vals, dtype=np.float64).reshape(shape)

    def _std_normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def integers(self, high: int, size=None):
        """Integers in [0, high) by multiply-shift on the top 32 bits."""
        if size is None:
            return ((self.next_u64() >> 32) * high) >> 32
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        vals = [((self.next_u64() >> 32) * high) >> 32 for _ in range(n)]
        return np.asarray(vals, dtype=np.int64).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        out = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(i + 1)
            out[i], out[j] = out[j], out[i]
        return np.asarray(out, dtype=np.int64)

    def spawn(self, *path: int) -> "Rng":
        return Rng(derive_seed(self.seed, *path))
