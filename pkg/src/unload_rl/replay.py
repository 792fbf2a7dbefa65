"""Uniform replay buffer with FIFO eviction."""

from __future__ import annotations

from typing import List, NamedTuple, Optional

import numpy as np

from .errors import InputError, ProtocolError


class Transition(NamedTuple):
    observation: np.ndarray
    action: int  # row-major pixel index
    reward: float
    next_observation: np.ndarray
    terminal: bool


class Batch(NamedTuple):
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray
    terminals: np.ndarray


class ReplayBuffer:
    """Ring of transitions.

    Records keep references to the pushed arrays; consecutive transitions
    share observation objects, so memory is about one frame per step.
    """

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise InputError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._ring: List[Optional[Transition]] = []
        self._cursor = 0
        self._shape = None

    def __len__(self) -> int:
        return len(self._ring)

    def push(self, transition: Transition) -> None:
        obs, nxt = np.asarray(transition.observation), np.asarray(transition.next_observation)
        if self._shape is None:
            self._shape = obs.shape
        if obs.shape != self._shape or nxt.shape != self._shape:
            raise InputError(
                f"observation shapes {obs.shape}/{nxt.shape} differ from stored {self._shape}"
            )
        if len(self._ring) < self.capacity:
            self._ring.append(transition)
        else:
            self._ring[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity

    def records(self) -> List[Transition]:
        """Stored transitions, oldest first."""
        if len(self._ring) < self.capacity:
            return list(self._ring)
        return self._ring[self._cursor :] + self._ring[: self._cursor]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if not self._ring:
            raise ProtocolError("cannot sample from an empty replay buffer")
        return rng.integers(0, len(self._ring), size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        return [self._ring[i] for i in self.sample_indices(batch_size, rng)]

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        picks = self.sample(batch_size, rng)
        return Batch(
            np.stack([t.observation for t in picks]),
            np.array([t.action for t in picks], dtype=np.int64),
            np.array([t.reward for t in picks], dtype=np.float64),
            np.stack([t.next_observation for t in picks]),
            np.array([t.terminal for t in picks], dtype=bool),
        )
