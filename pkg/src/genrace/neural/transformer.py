"""Single-layer, single-head causal transformer decoder over bits."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..bitspace import TrainingSet
from ..contract import as_rng
from .base import NeuralModel, one_hot, shifted_one_hot, sigmoid_np

MASK_VALUE = -1e9


def sinusoidal_encoding(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    freq = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq[: dim // 2])
    return pe


def causal_mask(length: int) -> np.ndarray:
    return np.triu(np.full((length, length), MASK_VALUE), k=1)


def _layer_norm_np(x, gamma, beta, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


class TransformerModel(NeuralModel):
    """Leaky-ReLU input embedding plus sinusoidal positions, one causal
    attention block and a ReLU feed-forward block (post-norm residuals), then a
    two-way softmax head."""

    tag = "tf"
    exact_log_prob = True

    def __init__(self, n_var: int, d_model: int = 64, lr: float = 1e-3, seed: int | None = 0):
        super().__init__(n_var, seed)
        d = self.d_model = d_model
        self._add_linear("embed", 2, d)
        for name in ("query", "key", "value", "attn_out"):
            self._add_linear(name, d, d)
        self._add("ln1.gamma", np.ones(d))
        self._add("ln1.beta", np.zeros(d))
        self._add_linear("ffn_in", d, d)
        self._add_linear("ffn_out", d, d)
        self._add("ln2.gamma", np.ones(d))
        self._add("ln2.beta", np.zeros(d))
        self._add_linear("head", d, 2)
        self.positions = sinusoidal_encoding(n_var, d)
        self.mask = causal_mask(n_var)
        self.lr = lr
        self.adam = ad.Adam(self.params, lr=lr)

    def logits(self, bits: np.ndarray) -> ad.Tensor:
        """Conditional logits ``(B, n_var, 2)``; position i sees bits ``< i``."""
        p = self.params
        x = ad.Tensor(shifted_one_hot(bits))
        e = ad.leaky_relu(self.linear("embed", x)) + self.positions
        q, k, v = (self.linear(name, e) for name in ("query", "key", "value"))
        scores = ad.matmul(q, ad.transpose(k)) * (1.0 / np.sqrt(self.d_model)) + self.mask
        attended = ad.matmul(ad.softmax(scores, axis=-1), v)
        h = ad.layer_norm(e + self.linear("attn_out", attended), p["ln1.gamma"], p["ln1.beta"])
        f = self.linear("ffn_out", ad.relu(self.linear("ffn_in", h)))
        h2 = ad.layer_norm(h + f, p["ln2.gamma"], p["ln2.beta"])
        return self.linear("head", h2)

    def nll(self, bits: np.ndarray, weights: np.ndarray) -> ad.Tensor:
        lp = ad.sum(ad.log_softmax(self.logits(bits), axis=-1) * one_hot(bits), axis=(1, 2))
        return -ad.sum(lp * np.asarray(weights, dtype=np.float64))

    def conditionals(self, bits: np.ndarray) -> np.ndarray:
        """``P(bit_i = 1 | bits_<i)`` for every position, shape ``(B, n_var)``."""
        with ad.no_grad():
            lg = self.logits(np.asarray(bits)).data
        return sigmoid_np(lg[..., 1] - lg[..., 0])

    def log_prob(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        with ad.no_grad():
            lg = self.logits(bits).data
        z = lg - lg.max(axis=-1, keepdims=True)
        lp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
        return (lp * one_hot(bits)).sum(axis=(1, 2))

    def train_step(self, train: TrainingSet) -> float:
        self.adam.zero_grad()
        loss = self.nll(train.bits, train.weights)
        value = loss.item()
        if not np.isfinite(value):
            raise FloatingPointError(f"tf loss became {value} at step {self.adam.t + 1}")
        loss.backward()
        self.adam.step()
        return value

    def sample(self, n: int, rng) -> np.ndarray:
        """Autoregressive sampling with cached keys and values."""
        rng = as_rng(rng)
        p = {k: v.data for k, v in self.params.items()}
        lin = self.np_linear
        scale = 1.0 / np.sqrt(self.d_model)
        keys = np.zeros((n, self.n_var, self.d_model))
        values = np.zeros_like(keys)
        x = np.zeros((n, 2))
        out = np.zeros((n, self.n_var), dtype=np.uint8)
        for i in range(self.n_var):
            pre = lin("embed", x)
            e = np.where(pre > 0, pre, 0.01 * pre) + self.positions[i]
            q = lin("query", e)
            keys[:, i], values[:, i] = lin("key", e), lin("value", e)
            s = np.einsum("bd,btd->bt", q, keys[:, : i + 1]) * scale
            s = np.exp(s - s.max(axis=1, keepdims=True))
            att = s / s.sum(axis=1, keepdims=True)
            a = np.einsum("bt,btd->bd", att, values[:, : i + 1])
            h = _layer_norm_np(e + lin("attn_out", a), p["ln1.gamma"], p["ln1.beta"])
            f = lin("ffn_out", np.maximum(lin("ffn_in", h), 0))
            h2 = _layer_norm_np(h + f, p["ln2.gamma"], p["ln2.beta"])
            lg = lin("head", h2)
            bit = (rng.random(n) < sigmoid_np(lg[:, 1] - lg[:, 0])).astype(np.uint8)
            out[:, i] = bit
            x = np.eye(2)[bit]
        return out

    def hyperparameters(self) -> dict:
        return {
            "Number of layers": 1,
            "Number of attention heads": 1,
            "Embedding dimension size": self.d_model,
            "Size of FFNN output": self.d_model,
            "Optimizer": "Adam optimizer",
            "Learning rate": self.lr,
            "Total number of parameters": self.parameter_count(),
        }
