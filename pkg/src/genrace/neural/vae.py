"""Variational autoencoder with a Bernoulli decoder and CELU MLPs."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..bitspace import TrainingSet
from ..contract import as_rng
from .base import NeuralModel, celu_np, sigmoid_np

CELU_ALPHA = 2.0


class VaeModel(NeuralModel):
    tag = "vae"

    def __init__(self, n_var: int, latent_dim: int = 128, hidden: int | None = None, lr: float = 1e-3,
                 kl_weight: float = 1.0, batch_size: int = 64, seed: int | None = 0):
        super().__init__(n_var, seed)
        h = hidden or latent_dim
        self.latent_dim, self.hidden = latent_dim, h
        self._add_linear("enc1", n_var, h)
        self._add_linear("enc2", h, h)
        self._add_linear("enc_mean", h, latent_dim)
        self._add_linear("enc_logvar", h, latent_dim)
        self._add_linear("dec1", latent_dim, h)
        self._add_linear("dec2", h, h)
        self._add_linear("dec_out", h, n_var)
        self.lr = lr
        self.kl_weight = kl_weight
        self.batch_size = batch_size
        self.adam = ad.Adam(self.params, lr=lr)
        self.last_terms: tuple[float, float] | None = None

    def encode(self, x):
        h = ad.celu(self.linear("enc1", x), CELU_ALPHA)
        h = ad.celu(self.linear("enc2", h), CELU_ALPHA)
        return self.linear("enc_mean", h), self.linear("enc_logvar", h)

    def decode(self, z):
        h = ad.celu(self.linear("dec1", z), CELU_ALPHA)
        h = ad.celu(self.linear("dec2", h), CELU_ALPHA)
        return self.linear("dec_out", h)

    def decode_logits(self, z: np.ndarray) -> np.ndarray:
        h = celu_np(self.np_linear("dec1", z), CELU_ALPHA)
        h = celu_np(self.np_linear("dec2", h), CELU_ALPHA)
        return self.np_linear("dec_out", h)

    def loss_terms(self, bits: np.ndarray, noise: np.ndarray):
        """Batch-mean ``(total, reconstruction, kl)`` with fixed reparametrization noise."""
        x = np.asarray(bits, dtype=np.float64)
        mean, logvar = self.encode(ad.Tensor(x))
        z = mean + ad.exp(logvar * 0.5) * noise
        logits = self.decode(z)
        recon = ad.sum(ad.softplus(logits) - logits * x, axis=1)
        kl = ad.sum(ad.exp(logvar) + ad.square(mean) - logvar - 1.0, axis=1) * 0.5
        recon, kl = ad.mean(recon), ad.mean(kl)
        return recon + kl * self.kl_weight, recon, kl

    def elbo(self, bits: np.ndarray, n_samples: int, rng) -> np.ndarray:
        """Monte-Carlo ELBO per input, averaged over ``n_samples`` latent draws."""
        rng = as_rng(rng)
        x = np.asarray(bits, dtype=np.float64)
        with ad.no_grad():
            mean, logvar = (t.data for t in self.encode(ad.Tensor(x)))
        eps = rng.standard_normal((n_samples,) + mean.shape)
        z = mean + np.exp(0.5 * logvar) * eps
        logits = self.decode_logits(z.reshape(-1, self.latent_dim)).reshape(n_samples, len(x), -1)
        log_like = -(np.logaddexp(0, logits) - logits * x).sum(axis=-1).mean(axis=0)
        kl = 0.5 * (np.exp(logvar) + mean**2 - logvar - 1).sum(axis=1)
        return log_like - kl

    def train_step_terms(self, train: TrainingSet) -> tuple[float, float]:
        batch = train.sample_minibatch(self.batch_size, self.rng)
        noise = self.rng.standard_normal((self.batch_size, self.latent_dim))
        self.adam.zero_grad()
        total, recon, kl = self.loss_terms(batch, noise)
        if not np.isfinite(total.item()):
            raise FloatingPointError(f"vae loss became {total.item()} at step {self.adam.t + 1}")
        total.backward()
        self.adam.step()
        self.last_terms = (recon.item(), kl.item())
        return self.last_terms

    def train_step(self, train: TrainingSet) -> float:
        recon, kl = self.train_step_terms(train)
        return recon + self.kl_weight * kl

    def sample(self, n: int, rng) -> np.ndarray:
        rng = as_rng(rng)
        z = rng.standard_normal((n, self.latent_dim))
        p_one = sigmoid_np(self.decode_logits(z))
        return (rng.random(p_one.shape) < p_one).astype(np.uint8)

    def hyperparameters(self) -> dict:
        return {
            "Prior size": self.latent_dim,
            "Encoder architecture": "FFNN with CELU (alpha = 2) activation",
            "Encoder hidden layers width": self.hidden,
            "Number of hidden layers of encoder net": 2,
            "Decoder architecture": "FFNN with CELU (alpha = 2) activation",
            "Decoder hidden layers width": self.hidden,
            "Number of hidden layers of decoder net": 2,
            "KL weight": self.kl_weight,
            "Optimizer": "Adam optimizer",
            "Learning rate": self.lr,
            "Total number of parameters": self.parameter_count(),
        }
