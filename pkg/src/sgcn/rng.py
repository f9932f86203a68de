"""SplitMix64: a tiny, fully specified 64-bit generator.

Used for every random draw in the package (weight init, OOV rows,
shuffling, synthetic corpora) so that a seed means the same stream on any
platform and numpy version.
"""

from __future__ import annotations

from typing import List, MutableSequence, Sequence, Tuple, TypeVar

import numpy as np

T = TypeVar("T")

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def u64_array(self, n: int) -> np.ndarray:
        """The next ``n`` outputs, identical to ``n`` calls of :meth:`next_u64`."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GOLDEN)
            out = _mix(states)
        self.state = (self.state + n * GOLDEN) & MASK64
        return out

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float, shape: Tuple[int, ...] | int) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        unit = (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return (low + (high - low) * unit).reshape(shape)

    def below(self, n: int) -> int:
        """Integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        return min(int(self.random() * n), n - 1)

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> List[int]:
        order = list(range(n))
        self.shuffle(order)
        return order

    def choice(self, items: Sequence[T]) -> T:
        return items[self.below(len(items))]

    def fork(self) -> "SplitMix64":
        """Independent child stream seeded from this one."""
        return SplitMix64(self.next_u64())
