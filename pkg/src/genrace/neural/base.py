"""Shared plumbing for the classical models: parameter registry, linear layers,
checkpoints and the one-hot input encoding used by the autoregressive models."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .. import autodiff as ad


class NeuralModel:
    tag = "neural"
    exact_log_prob = False

    def __init__(self, n_var: int, seed: int | None = 0):
        if n_var < 1:
            raise ValueError("n_var must be positive")
        self.n_var = n_var
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, ad.Tensor] = {}

    def _add_linear(self, name: str, fan_in: int, fan_out: int) -> None:
        bound = 1.0 / math.sqrt(fan_in)
        self.params[f"{name}.weight"] = ad.parameter(
            self.rng.uniform(-bound, bound, (fan_in, fan_out)), f"{name}.weight")
        self.params[f"{name}.bias"] = ad.parameter(
            self.rng.uniform(-bound, bound, fan_out), f"{name}.bias")

    def _add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = ad.parameter(value, name)

    def linear(self, name: str, x):
        return ad.add(ad.matmul(x, self.params[f"{name}.weight"]), self.params[f"{name}.bias"])

    def np_linear(self, name: str, x: np.ndarray) -> np.ndarray:
        return x @ self.params[f"{name}.weight"].data + self.params[f"{name}.bias"].data

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def zero_parameters(self) -> None:
        for p in self.params.values():
            p.data = np.zeros_like(p.data)

    def save(self, path: str | Path) -> None:
        ad.save_tensors(path, self.params)

    def load_state(self, path: str | Path) -> None:
        state = ad.load_tensors(path)
        if state.keys() != self.params.keys():
            raise ValueError(f"{path}: parameter names do not match {self.tag}")
        for name, value in state.items():
            if value.shape != self.params[name].shape:
                raise ValueError(f"{path}: shape mismatch for {name}")
            self.params[name].data = value


def shifted_one_hot(bits: np.ndarray) -> np.ndarray:
    """Inputs for autoregressive models: position i carries bit i-1 one-hot,
    position 0 carries the zero vector."""
    bits = np.asarray(bits, dtype=np.int64)
    b, n = bits.shape
    out = np.zeros((b, n, 2))
    out[:, 1:, :] = np.eye(2)[bits[:, :-1]]
    return out


def one_hot(bits: np.ndarray) -> np.ndarray:
    return np.eye(2)[np.asarray(bits, dtype=np.int64)]


def celu_np(x: np.ndarray, alpha: float = 2.0) -> np.ndarray:
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0) / alpha))


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1 + np.tanh(0.5 * x))
