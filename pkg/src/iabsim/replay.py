"""Fixed-capacity experience buffer with uniform random sampling."""

from __future__ import annotations

import numpy as np

from iabsim.env import Transition


class ReplayBuffer:
    """Ring buffer; once full, the oldest transition is overwritten first.
    Sampling is uniform with replacement."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._storage: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._storage)

    def push(self, t: Transition) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(t)
        else:
            self._storage[self._cursor] = t
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if not self._storage:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._storage), size=n)
        return [self._storage[i] for i in idx]
