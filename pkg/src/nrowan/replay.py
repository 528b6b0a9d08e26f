from __future__ import annotations

from typing import NamedTuple

import numpy as np


class NotReadyError(RuntimeError):
    pass


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __eq__(self, other):
        return (
            isinstance(other, Transition)
            and np.array_equal(self.state, other.state)
            and self.action == other.action
            and self.reward == other.reward
            and np.array_equal(self.next_state, other.next_state)
            and self.terminal == other.terminal
        )

    __hash__ = None


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


class ReplayBuffer:
    """Ring buffer of transitions stored column-wise in preallocated arrays."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.terminals = np.zeros(capacity, dtype=bool)
        self.write_cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition) -> None:
        i = self.write_cursor
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.terminals[i] = t.terminal
        self.write_cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __getitem__(self, i: int) -> Transition:
        """Item ``i`` in insertion order (0 is the oldest stored)."""
        if not -self.size <= i < self.size:
            raise IndexError(i)
        start = self.write_cursor if self.size == self.capacity else 0
        j = (start + i % self.size) % self.capacity
        return Transition(
            self.states[j].copy(), int(self.actions[j]), float(self.rewards[j]),
            self.next_states[j].copy(), bool(self.terminals[j]),
        )

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draw with replacement, returned as stacked arrays."""
        if self.size < batch_size:
            raise NotReadyError(f"buffer holds {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.terminals[idx])

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        b = self.sample_batch(batch_size, rng)
        return [
            Transition(b.states[i], int(b.actions[i]), float(b.rewards[i]), b.next_states[i], bool(b.terminals[i]))
            for i in range(batch_size)
        ]
