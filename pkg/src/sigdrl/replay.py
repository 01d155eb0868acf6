from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions; batches are drawn without replacement."""

    def __init__(self, capacity: int, obs_dim: int, rng: np.random.Generator, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.obs = np.zeros((capacity, obs_dim), dtype)
        self.next_obs = np.zeros((capacity, obs_dim), dtype)
        self.act = np.zeros(capacity, dtype)
        self.rew = np.zeros(capacity, dtype)
        self.done = np.zeros(capacity, dtype)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act: float, rew: float, next_obs, done: bool) -> None:
        if not (np.all(np.isfinite(obs)) and np.all(np.isfinite(next_obs))):
            raise ValueError("non-finite observation in transition")
        if not (np.isfinite(act) and np.isfinite(rew)):
            raise ValueError("non-finite action or reward in transition")
        i = self.ptr
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.act[i] = act
        self.rew[i] = rew
        self.done[i] = float(done)
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        if batch_size > self.size:
            raise ValueError(f"cannot draw {batch_size} from {self.size} transitions")
        idx = self.rng.choice(self.size, batch_size, replace=False)
        return Batch(self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx])
