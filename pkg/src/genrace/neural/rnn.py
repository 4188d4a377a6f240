"""GRU recurrent network with a softmax head, trained on the weighted NLL of
the training distribution."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..bitspace import TrainingSet
from ..contract import as_rng
from .base import NeuralModel, one_hot, shifted_one_hot, sigmoid_np

GATES = ("r", "z", "n")


class RnnModel(NeuralModel):
    """GRU cell in the usual reset/update formulation, with separate input and
    hidden biases on every gate (so ``3 * (2h + h*h + 2h)`` cell parameters)."""

    tag = "rnn"
    exact_log_prob = True

    def __init__(self, n_var: int, hidden: int = 32, lr: float = 1e-3, seed: int | None = 0):
        super().__init__(n_var, seed)
        self.hidden = hidden
        bound = 1.0 / np.sqrt(hidden)
        for g in GATES:
            self._add(f"weight_i{g}", self.rng.uniform(-bound, bound, (2, hidden)))
            self._add(f"weight_h{g}", self.rng.uniform(-bound, bound, (hidden, hidden)))
            self._add(f"bias_i{g}", self.rng.uniform(-bound, bound, hidden))
            self._add(f"bias_h{g}", self.rng.uniform(-bound, bound, hidden))
        self._add_linear("head", hidden, 2)
        self.lr = lr
        self.adam = ad.Adam(self.params, lr=lr)

    def _cell(self, x, h):
        p = self.params

        def gate(g):
            return (ad.add(ad.matmul(x, p[f"weight_i{g}"]), p[f"bias_i{g}"]),
                    ad.add(ad.matmul(h, p[f"weight_h{g}"]), p[f"bias_h{g}"]))

        ir, hr = gate("r")
        iz, hz = gate("z")
        in_, hn = gate("n")
        r = ad.sigmoid(ir + hr)
        z = ad.sigmoid(iz + hz)
        n = ad.tanh(in_ + r * hn)
        return (1.0 - z) * n + z * h

    def conditional_logits(self, bits: np.ndarray) -> list:
        """Head logits ``(B, 2)`` for each position given the preceding bits."""
        inputs = shifted_one_hot(bits)
        h = ad.Tensor(np.zeros((len(bits), self.hidden)))
        out = []
        for i in range(self.n_var):
            h = self._cell(ad.Tensor(inputs[:, i, :]), h)
            out.append(self.linear("head", h))
        return out

    def nll(self, bits: np.ndarray, weights: np.ndarray) -> ad.Tensor:
        """``-sum_b w_b log P(x_b)``."""
        targets = one_hot(bits)
        total = None
        for i, logits in enumerate(self.conditional_logits(bits)):
            lp = ad.sum(ad.log_softmax(logits) * targets[:, i, :], axis=1)
            total = lp if total is None else total + lp
        return -ad.sum(total * np.asarray(weights, dtype=np.float64))

    def log_prob(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        with ad.no_grad():
            logits = self.conditional_logits(bits)
        targets = one_hot(bits)
        total = np.zeros(len(bits))
        for i, lg in enumerate(logits):
            z = lg.data - lg.data.max(axis=1, keepdims=True)
            lp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
            total += (lp * targets[:, i, :]).sum(axis=1)
        return total

    def train_step(self, train: TrainingSet) -> float:
        self.adam.zero_grad()
        loss = self.nll(train.bits, train.weights)
        value = loss.item()
        if not np.isfinite(value):
            raise FloatingPointError(f"rnn loss became {value} at step {self.adam.t + 1}")
        loss.backward()
        self.adam.step()
        return value

    def sample(self, n: int, rng) -> np.ndarray:
        rng = as_rng(rng)
        p = {k: v.data for k, v in self.params.items()}
        h = np.zeros((n, self.hidden))
        x = np.zeros((n, 2))
        out = np.zeros((n, self.n_var), dtype=np.uint8)
        for i in range(self.n_var):
            r = sigmoid_np(x @ p["weight_ir"] + p["bias_ir"] + h @ p["weight_hr"] + p["bias_hr"])
            z = sigmoid_np(x @ p["weight_iz"] + p["bias_iz"] + h @ p["weight_hz"] + p["bias_hz"])
            c = np.tanh(x @ p["weight_in"] + p["bias_in"] + r * (h @ p["weight_hn"] + p["bias_hn"]))
            h = (1 - z) * c + z * h
            logits = h @ p["head.weight"] + p["head.bias"]
            p_one = sigmoid_np(logits[:, 1] - logits[:, 0])
            bit = (rng.random(n) < p_one).astype(np.uint8)
            out[:, i] = bit
            x = np.eye(2)[bit]
        return out

    def cell_parameter_count(self) -> int:
        return sum(v.data.size for k, v in self.params.items() if not k.startswith("head"))

    def hyperparameters(self) -> dict:
        return {
            "Architecture": "GRU",
            "Number of layers": 1,
            "Optimizer": "Adam optimizer",
            "Learning rate": self.lr,
            "Number of hidden units": self.hidden,
            "Total number of parameters": self.cell_parameter_count(),
        }
