"""Counter-based SplitMix64 random stream.

Every draw is a pure function of (seed, counter), so the stream is
reproducible bit-for-bit on any platform: the integer pipeline uses only
64-bit wrapping arithmetic. Floating-point conversion maps the top 53 bits
onto [0, 1).
"""

from __future__ import annotations

import math

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """One SplitMix64 finalizer round on a bare integer (for seed derivation)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class Rng:
    """Deterministic generator; identical seeds give identical streams."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._counter = 0

    def split(self, key: int) -> "Rng":
        """Derive an independent child stream keyed by an integer."""
        return Rng(mix64(self.seed ^ mix64(key ^ 0x5851F42D4C957F2D)))

    def next_u64(self, n: int = 1) -> np.ndarray:
        idx = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        state = (np.uint64(self.seed) + (idx + _U64(1)) * _GAMMA)
        return _mix(state)

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        u = (self.next_u64(n) >> _U64(11)).astype(np.float64) * 2.0 ** -53
        out = low + u * (high - low)
        return out.reshape(shape) if shape else out[0]

    def normal(self, shape=()) -> np.ndarray:
        """Standard normal via Box-Muller on consecutive uniform pairs."""
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        bits = self.next_u64(2 * m)
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((bits[:m] >> _U64(11)) + _U64(1)).astype(np.float64) * 2.0 ** -53
        u2 = (bits[m:] >> _U64(11)).astype(np.float64) * 2.0 ** -53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out.reshape(shape) if shape else out[0]
