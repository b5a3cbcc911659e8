"""Replay memory for off-policy training."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError

# column name -> width; the last two feed the differentiable one-step objective
FIELDS = {
    "state": 3,
    "action": 18,
    "cost": 1,
    "next_state": 3,
    "done": 1,
    "eps_frame": 6,
    "pre_error": 3,
}


class ReplayMemory:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ConfigurationError("replay capacity must be positive")
        self.capacity = capacity
        self._data = {k: np.zeros((capacity, w)) for k, w in FIELDS.items()}
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add_batch(self, **columns) -> None:
        """Append ``n`` transitions given column-wise; nothing is stored if any column is invalid."""
        n = len(columns["state"])
        cols = {}
        for k, w in FIELDS.items():
            col = np.asarray(columns[k], dtype=float).reshape(n, w)
            if not np.all(np.isfinite(col)):
                raise ValueError(f"non-finite {k} in transitions")
            cols[k] = col
        if np.any(cols["cost"] < 0):
            raise ValueError("costs must be non-negative")
        idx = (self._next + np.arange(n)) % self.capacity
        for k, col in cols.items():
            self._data[k][idx] = col
        self._next = (self._next + n) % self.capacity
        self._size = min(self._size + n, self.capacity)

    def add_trace(self, trace) -> None:
        self.add_batch(state=trace.state, action=trace.action, cost=trace.cost,
                       next_state=trace.next_state, done=trace.done,
                       eps_frame=trace.eps_frame, pre_error=trace.pre_error)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        if batch_size > self._size:
            raise ValueError(f"cannot sample {batch_size} from {self._size} transitions")
        idx = rng.integers(0, self._size, batch_size)
        return {k: v[idx] for k, v in self._data.items()}
