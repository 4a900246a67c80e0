"""Counter-based deterministic random streams.

Every round of a simulation gets its own stream keyed by (seed, index),
so rounds can be generated in any order, in chunks, or concurrently and
still produce identical transcripts. The generator is SplitMix64: the
stream state advances by a fixed odd gamma and each output is the
SplitMix64 finalizer of the state. The compiled kernel reimplements the
same arithmetic; uniform doubles are ``(u64 >> 11) * 2**-53``.
"""

from __future__ import annotations

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_DOMAIN = 0xA0761D6478BD642F

# Streams that are not tied to a protocol round use indices far above any
# realistic round count.
SAMPLING_STREAM = 1 << 62

_TO_DOUBLE = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class Stream:
    """Uniform double stream for one (seed, index) pair."""

    __slots__ = ("_state",)

    def __init__(self, seed: int, index: int):
        h = mix64((seed & _MASK) ^ _DOMAIN)
        self._state = mix64(h ^ (index & _MASK))

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return mix64(self._state)

    def uniform(self) -> float:
        """One double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _TO_DOUBLE
