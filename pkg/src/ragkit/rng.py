"""Portable deterministic randomness for sampling and shuffling steps.

Every seeded operation in this package uses xoshiro256** (Blackman &
Vigna) with its state initialized from the seed via splitmix64, exactly
as the reference implementation recommends. Both algorithms are fully
specified 64-bit integer recurrences, so any implementation language can
reproduce the same permutations from the same seed. Bounded draws use
rejection sampling (no modulo bias) and shuffles are backwards
Fisher-Yates, which keeps the stream layout unambiguous.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 output mixing function."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _splitmix_next(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & MASK64
    return state, _mix64(state)


def derive_seed(seed: int, index: int) -> int:
    """Combine a base seed and a record index into an independent stream seed.

    Each part goes through one splitmix64 step before the xor so that
    nearby (seed, index) pairs land far apart in seed space.
    """
    a = _mix64((seed + _GOLDEN) & MASK64)
    b = _mix64((index + ((_GOLDEN << 1) & MASK64)) & MASK64)
    return _mix64((a ^ b) & MASK64)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** 1.0, seeded through four splitmix64 outputs."""

    def __init__(self, seed: int):
        state = seed & MASK64
        s = []
        for _ in range(4):
            state, out = _splitmix_next(state)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place backwards Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """k items drawn without replacement (partial Fisher-Yates)."""
        if k < 0 or k > len(items):
            raise ValueError(f"cannot sample {k} items from {len(items)}")
        pool = list(items)
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
