"""Portable seeded randomness for reproducible simulation traces.

SplitMix64: state advances by the 64-bit golden-gamma constant
0x9E3779B97F4A7C15 and each output is the finalizer

    z  = state
    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

all arithmetic mod 2^64.  The algorithm is written out here (and in the
README) so an independent script can replay any drop or RAND sequence
from the seed alone.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """Deterministic 64-bit generator; one instance per random stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return (z ^ (z >> 31)) & _MASK

    def next_float(self) -> float:
        """Uniform in [0, 1): top 53 bits of the next output."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_bytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += self.next_u64().to_bytes(8, "big")
        return bytes(out[:n])

    def next_below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound); fine for test generators."""
        return self.next_u64() % bound
