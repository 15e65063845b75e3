"""Portable seeded random streams.

SplitMix64 (Steele, Lea & Flood 2014; constants as in Vigna's reference
``splitmix64.c``) used in counter mode: output ``k`` of a stream with seed
``s`` is ``mix(s + (k + 1) * GOLDEN)`` modulo 2**64.  Because each output
depends only on (seed, counter), streams vectorise cleanly and reproduce
bit-for-bit on any platform with IEEE-754 doubles.

Uniform doubles take the top 53 bits.  Normals use the Box-Muller
transform over consecutive output pairs.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1
_TWO_NEG_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """Scalar SplitMix64 finaliser."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Mix integer keys into a seed to get an independent sub-stream seed."""
    s = seed & MASK64
    for k in keys:
        s = mix64(s + ((k + 1) * GOLDEN))
    return s


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-mode SplitMix64 stream.

    >>> SplitMix64(1234567).next_uint64(2).tolist()
    [6457827717110365317, 3203168211198807973]
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.counter = 0

    def next_uint64(self, n: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + k * np.uint64(GOLDEN)
            return _mix_array(z)

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1)."""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53

    def integers(self, n: int, high: int) -> np.ndarray:
        """Integers in [0, high); ``high`` must be below 2**53."""
        out = np.floor(self.uniform(n) * high).astype(np.int64)
        return np.minimum(out, high - 1)

    def normal(self, n: int, mean: float = 0.0, sd: float = 1.0) -> np.ndarray:
        m = (n + 1) // 2
        raw = self.next_uint64(2 * m) >> np.uint64(11)
        u1 = (raw[0::2].astype(np.float64) + 1.0) * _TWO_NEG_53  # (0, 1]
        u2 = raw[1::2].astype(np.float64) * _TWO_NEG_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return mean + sd * z[:n]
