"""Deterministic pseudo-random generator for reproducible sampling.

The sampler must produce byte-identical output for a given seed on every
platform and in every language a re-implementation might use, so it cannot
rely on a host library's RNG. We use SplitMix64 (Steele, Lea & Flood 2014),
a tiny 64-bit generator defined purely by integer arithmetic:

    state := (state + 0x9E3779B97F4A7C15) mod 2^64
    z := state
    z := ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z := ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output := z XOR (z >> 31)

Bounded draws use rejection sampling, so they are unbiased and reproducible.
The generator name recorded in run manifests is "splitmix64".
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (unbiased)."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle_prefix(self, items: list, m: int) -> list:
        """Partial Fisher-Yates: the first m slots of an in-place shuffle.

        Mutates and returns `items`; items[:m] is the drawn sample.
        """
        n = len(items)
        for i in range(min(m, n - 1)):
            j = i + self.next_below(n - i)
            items[i], items[j] = items[j], items[i]
        return items


def substream(seed: int, label: int) -> SplitMix64:
    """Independent stream for (seed, label), e.g. one per sampling bin.

    Derivation: one SplitMix64 output-mix of seed XOR (label+1)*GOLDEN.
    Pure integer arithmetic, stable across platforms.
    """
    return SplitMix64(_mix((seed ^ (((label + 1) * _GOLDEN) & _MASK64)) & _MASK64))
