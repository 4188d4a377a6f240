"""The interface every generative model in a race implements."""
from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from .bitspace import TrainingSet


@runtime_checkable
class GenerativeModel(Protocol):
    tag: str
    n_var: int
    exact_log_prob: bool

    def train_step(self, train: TrainingSet) -> float:
        """Advance one training step and return the step's loss."""

    def sample(self, n: int, rng: np.random.Generator | int) -> np.ndarray:
        """Return ``(n, n_var)`` bits; reproducible for a fixed seed."""

    def parameter_count(self) -> int: ...

    def hyperparameters(self) -> dict: ...


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
