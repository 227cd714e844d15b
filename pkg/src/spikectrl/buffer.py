"""Recorded episodes and their bounded FIFO store."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass
class Episode:
    """One rollout of T steps.

    states holds T+1 rows (the reset observation plus one per step) so any
    window of warmup + unroll steps has its final prediction target
    available; actions are the executed (noisy, clamped) controls.
    """

    states: np.ndarray     # (T+1, state_dim)
    actions: np.ndarray    # (T, action_dim)
    targets: np.ndarray    # (T+1, target_dim), constant rows for reaching
    distances: np.ndarray  # (T,)
    seed: int
    task_id: int = -1

    def __post_init__(self):
        t = len(self.actions)
        if len(self.states) != t + 1 or len(self.targets) != t + 1 \
                or len(self.distances) != t:
            raise ValueError("episode sequence lengths are inconsistent")
        if np.abs(self.actions).max(initial=0.0) > 1.0 + 1e-12:
            raise ValueError("recorded actions must lie in [-1, 1]")

    @property
    def steps(self) -> int:
        return len(self.actions)


class ReplayBuffer:
    """Bounded FIFO episode store; eviction is strictly oldest-first."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._store: deque[Episode] = deque(maxlen=capacity)

    def push(self, episode: Episode) -> None:
        self._store.append(episode)

    def extend(self, episodes) -> None:
        for ep in episodes:
            self.push(ep)

    def __len__(self) -> int:
        return len(self._store)

    def __getitem__(self, i: int) -> Episode:
        return self._store[i]

    def sample_indices(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n uniform indices with replacement."""
        if not self._store:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, len(self._store), size=n)
