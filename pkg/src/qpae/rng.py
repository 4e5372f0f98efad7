"""Deterministic seeded PRNG used everywhere in place of global randomness.

The generator is a counter-mode splitmix64 stream: output i is the
xorshift-multiply mix of ``seed + (i+1) * GOLDEN``.  Because each output
depends only on the seed and the draw index, scalar draws and bulk numpy
fills produce the *same* stream, and results are bit-reproducible across
platforms and numpy versions.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * _MIX1 & _MASK
    z = (z ^ (z >> 27)) * _MIX2 & _MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based splitmix64 stream with scalar and vectorized draws."""

    def __init__(self, seed: int):
        self._seed = int(seed) & _MASK
        self._count = 0

    def next_u64(self) -> int:
        self._count += 1
        return _mix64((self._seed + self._count * _GOLDEN) & _MASK)

    def fill_u64(self, n: int) -> np.ndarray:
        """n raw 64-bit outputs; identical to n successive next_u64 calls."""
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        return _mix64_array(np.uint64(self._seed) + idx * np.uint64(_GOLDEN))

    def uniform(self, n: int | None = None, low: float = 0.0, high: float = 1.0):
        """Uniform floats in [low, high) with 53-bit resolution."""
        if n is None:
            u = (self.next_u64() >> 11) * 2.0**-53
            return low + (high - low) * u
        u = (self.fill_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def normal(self, n: int | None = None, mu: float = 0.0, sigma: float = 1.0):
        """Gaussian draws via Box-Muller on consecutive stream pairs."""
        scalar = n is None
        count = 1 if scalar else int(n)
        pairs = (count + 1) // 2
        raw = self.fill_u64(2 * pairs)
        # (0,1] for the log argument, [0,1) for the angle
        u1 = ((raw[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:count]
        out = mu + sigma * z
        return float(out[0]) if scalar else out

    def randbelow(self, bound: int) -> int:
        """Integer in [0, bound); modulo bias is < bound / 2**64."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def shuffle(self, values: np.ndarray) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(values) - 1, 0, -1):
            j = self.randbelow(i + 1)
            values[i], values[j] = values[j], values[i]

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(n)
        self.shuffle(idx)
        return idx

    def spawn(self, key: int) -> "Rng":
        """Independent substream keyed off this generator's seed."""
        return Rng(derive_seed(self._seed, key))


def derive_seed(seed: int, key: int) -> int:
    """Stable 64-bit child seed for a (seed, purpose-key) pair."""
    return _mix64((int(seed) & _MASK) ^ _mix64(int(key) & _MASK))
