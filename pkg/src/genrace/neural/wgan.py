"""Wasserstein GAN with gradient penalty.

The penalty needs the critic's input gradient as a differentiable expression.
Rather than second-order autodiff, the critic's backward pass to its input is
written out explicitly with first-order ops (``celu_grad`` supplies the
activation derivative), and the resulting graph is differentiated once.
"""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..bitspace import TrainingSet
from ..contract import as_rng
from .base import NeuralModel, celu_np, sigmoid_np

CELU_ALPHA = 2.0
_NORM_EPS = 1e-12


class WganModel(NeuralModel):
    tag = "wgan"

    def __init__(self, n_var: int, prior: int = 8, lr: float = 1e-2, penalty: float = 10.0,
                 n_critic: int = 5, batch_size: int = 64, critic_hidden_layers: int = 2,
                 generator_hidden_layers: int = 2, seed: int | None = 0):
        super().__init__(n_var, seed)
        self.prior = prior
        self.gen_layers = [f"gen{i}" for i in range(generator_hidden_layers + 1)]
        self.critic_layers = [f"critic{i}" for i in range(critic_hidden_layers + 1)]
        widths = [prior] * (generator_hidden_layers + 1) + [n_var]
        for name, a, b in zip(self.gen_layers, widths[:-1], widths[1:]):
            self._add_linear(name, a, b)
        widths = [n_var] + [prior] * critic_hidden_layers + [1]
        for name, a, b in zip(self.critic_layers, widths[:-1], widths[1:]):
            self._add_linear(name, a, b)
        self.lr = lr
        self.penalty = penalty
        self.n_critic = n_critic
        self.batch_size = batch_size
        self.gen_params = {k: v for k, v in self.params.items() if k.startswith("gen")}
        self.critic_params = {k: v for k, v in self.params.items() if k.startswith("critic")}
        self.gen_adam = ad.Adam(self.gen_params, lr=lr)
        self.critic_adam = ad.Adam(self.critic_params, lr=lr)
        self.last_losses: tuple[float, float] | None = None

    # -- networks -------------------------------------------------------------

    def generate(self, z):
        h = z
        for name in self.gen_layers[:-1]:
            h = ad.celu(self.linear(name, h), CELU_ALPHA)
        return ad.sigmoid(self.linear(self.gen_layers[-1], h))

    def generate_np(self, z: np.ndarray) -> np.ndarray:
        return sigmoid_np(self.generator_logits(z))

    def generator_logits(self, z: np.ndarray) -> np.ndarray:
        h = z
        for name in self.gen_layers[:-1]:
            h = celu_np(self.np_linear(name, h), CELU_ALPHA)
        return self.np_linear(self.gen_layers[-1], h)

    def critic(self, x):
        h = x
        for name in self.critic_layers[:-1]:
            h = ad.celu(self.linear(name, h), CELU_ALPHA)
        return self.linear(self.critic_layers[-1], h)

    def critic_input_gradient(self, x: np.ndarray) -> ad.Tensor:
        """``d critic / d x`` at fixed inputs, as a graph over the critic weights."""
        pre = []
        h = ad.Tensor(x)
        for name in self.critic_layers[:-1]:
            a = self.linear(name, h)
            pre.append(a)
            h = ad.celu(a, CELU_ALPHA)
        weights = [self.params[f"{name}.weight"] for name in self.critic_layers]
        last = weights[-1]
        g = ad.reshape(last, (last.shape[0],))
        if not pre:
            return ad.reshape(g, (1, g.shape[0]))
        for a, w in zip(reversed(pre), reversed(weights[:-1])):
            g = ad.celu_grad(a, CELU_ALPHA) * g
            g = ad.matmul(g, ad.transpose(w))
        return g

    # -- losses ---------------------------------------------------------------

    def gradient_penalty(self, interpolates: np.ndarray) -> ad.Tensor:
        g = self.critic_input_gradient(interpolates)
        norm = ad.sqrt(ad.sum(ad.square(g), axis=1) + _NORM_EPS)
        return ad.mean(ad.square(norm - 1.0))

    def critic_loss(self, real: np.ndarray, fake: np.ndarray, alpha: np.ndarray) -> ad.Tensor:
        """``E f(fake) - E f(real) + lambda * E (|grad f(interp)| - 1)^2``."""
        real = np.asarray(real, dtype=np.float64)
        alpha = np.asarray(alpha, dtype=np.float64).reshape(-1, 1)
        interp = alpha * real + (1 - alpha) * fake
        loss = ad.mean(self.critic(ad.Tensor(fake))) - ad.mean(self.critic(ad.Tensor(real)))
        if self.penalty:
            loss = loss + self.gradient_penalty(interp) * self.penalty
        return loss

    def generator_loss(self, z: np.ndarray) -> ad.Tensor:
        return -ad.mean(self.critic(self.generate(ad.Tensor(z))))

    # -- training -------------------------------------------------------------

    def train_step_losses(self, train: TrainingSet, real_sampler=None) -> tuple[float, float]:
        """``n_critic`` critic updates then one generator update.

        ``real_sampler(size, rng)`` overrides the weighted minibatch draw.
        """
        draw = real_sampler or train.sample_minibatch
        b = self.batch_size
        for _ in range(self.n_critic):
            real = draw(b, self.rng)
            fake = self.generate_np(self.rng.standard_normal((b, self.prior)))
            alpha = self.rng.random(b)
            self.critic_adam.zero_grad()
            c_loss = self.critic_loss(real, fake, alpha)
            if not np.isfinite(c_loss.item()):
                raise FloatingPointError(f"wgan critic loss became {c_loss.item()}")
            c_loss.backward()
            self.critic_adam.step()
        self.gen_adam.zero_grad()
        g_loss = self.generator_loss(self.rng.standard_normal((b, self.prior)))
        if not np.isfinite(g_loss.item()):
            raise FloatingPointError(f"wgan generator loss became {g_loss.item()}")
        g_loss.backward()
        self.gen_adam.step()
        for p in self.critic_params.values():
            p.grad = None
        self.last_losses = (c_loss.item(), g_loss.item())
        return self.last_losses

    def train_step(self, train: TrainingSet) -> float:
        return self.train_step_losses(train)[1]

    def critic_gap(self, real: np.ndarray, fake: np.ndarray) -> float:
        """``E f(real) - E f(fake)``, the critic's Wasserstein estimate."""
        with ad.no_grad():
            return float(self.critic(ad.Tensor(np.asarray(real, float))).data.mean()
                         - self.critic(ad.Tensor(np.asarray(fake, float))).data.mean())

    def sample(self, n: int, rng) -> np.ndarray:
        rng = as_rng(rng)
        p_one = self.generate_np(rng.standard_normal((n, self.prior)))
        return (rng.random(p_one.shape) < p_one).astype(np.uint8)

    def hyperparameters(self) -> dict:
        arch = "FFNN with CELU (alpha = 2) activation"
        return {
            "Prior size": self.prior,
            "Generator architecture": arch,
            "Generator hidden layers width": self.prior,
            "Number of hidden layers of generator net": len(self.gen_layers) - 1,
            "Discriminator architecture": arch,
            "Discriminator hidden layers width": self.prior,
            "Number of hidden layers of discriminator net": len(self.critic_layers) - 1,
            "Optimizer": "Adam optimizer",
            "Gradient regularization": self.penalty,
            "Learning rate": self.lr,
            "Total number of parameters": self.parameter_count(),
        }
