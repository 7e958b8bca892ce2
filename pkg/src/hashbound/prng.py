"""Small explicit PRNG so every experiment is reproducible from a 64-bit seed.

The generator is xorshift64* (Marsaglia xorshift with shifts 12/25/27 and the
2685821657736338717 output multiplier).  State is seeded through one round of
splitmix64 so that nearby seeds and stream ids give unrelated sequences.  All
randomness in this package (weight init, epoch shuffling, synthetic data,
split sampling) flows through this class, never through global RNG state.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    """One splitmix64 output step; used to whiten seeds and derive streams."""
    value = (value + _SPLITMIX_GAMMA) & _MASK64
    z = value
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Xorshift64Star:
    """Deterministic xorshift64* stream.

    Args:
        seed: Any Python integer; reduced modulo 2**64.
        stream: Substream id.  Different streams from the same seed are
            decorrelated via splitmix64 so one experiment seed can feed
            several independent consumers (init vs. shuffling vs. data).
    """

    def __init__(self, seed: int, stream: int = 0):
        state = splitmix64((seed & _MASK64) ^ splitmix64(stream & _MASK64))
        # xorshift64* has a single forbidden state.
        self._state = state if state != 0 else _SPLITMIX_GAMMA
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s = self._state
        s ^= s >> 12
        s = (s ^ (s << 25)) & _MASK64
        s ^= s >> 27
        self._state = s
        return (s * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random mantissa bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)], dtype=np.float64)

    def normal(self) -> float:
        """Standard normal via Box-Muller; partner value is cached."""
        if self._spare_normal is not None:
            z, self._spare_normal = self._spare_normal, None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1]; keeps log() finite
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * math.pi * u2
        self._spare_normal = radius * math.sin(angle)
        return radius * math.cos(angle)

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)], dtype=np.float64)

    def randbelow(self, n: int) -> int:
        """Integer in [0, n).  Plain modulo; bias is ~n/2**64, negligible here."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return np.array(idx, dtype=np.int64)
