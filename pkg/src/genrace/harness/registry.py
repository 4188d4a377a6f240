"""Build a model from its tag and a dict of named hyperparameters."""
from __future__ import annotations

import logging

from ..neural import RnnModel, TransformerModel, VaeModel, WganModel
from ..qsim import QcbmModel
from .config import ConfigError

log = logging.getLogger(__name__)


def _require(hp: dict, key: str, expected) -> None:
    if key in hp and hp[key] != expected:
        raise ConfigError(f"{key} = {hp[key]!r} is not supported (only {expected!r})")


def _same(hp: dict, key: str, ref: str) -> None:
    if key in hp and hp[key] != hp[ref]:
        raise ConfigError(f"{key} must equal {ref} ({hp[ref]}), got {hp[key]}")


def _qcbm(n_var, hp, seed):
    _require(hp, "Circuit topology", "Line topology")
    return QcbmModel(n_var, n_layers=int(hp["Number of layers"]), seed=seed,
                     sigma0=float(hp.get("sigma0", 0.1)), popsize=hp.get("popsize"),
                     delta=float(hp.get("delta", 1e-8)))


def _rnn(n_var, hp, seed):
    _require(hp, "Architecture", "GRU")
    _require(hp, "Number of layers", 1)
    return RnnModel(n_var, hidden=int(hp["Number of hidden units"]),
                    lr=float(hp["Learning rate"]), seed=seed)


def _tf(n_var, hp, seed):
    _require(hp, "Number of layers", 1)
    _require(hp, "Number of attention heads", 1)
    _same(hp, "Size of FFNN output", "Embedding dimension size")
    return TransformerModel(n_var, d_model=int(hp["Embedding dimension size"]),
                            lr=float(hp["Learning rate"]), seed=seed)


def _vae(n_var, hp, seed):
    _require(hp, "Number of hidden layers of encoder net", 2)
    _require(hp, "Number of hidden layers of decoder net", 2)
    _same(hp, "Decoder hidden layers width", "Encoder hidden layers width")
    width = hp.get("Encoder hidden layers width", hp["Prior size"])
    return VaeModel(n_var, latent_dim=int(hp["Prior size"]), hidden=int(width),
                    lr=float(hp["Learning rate"]), kl_weight=float(hp.get("kl_weight", 1.0)),
                    batch_size=int(hp.get("batch_size", 64)), seed=seed)


def _wgan(n_var, hp, seed):
    _same(hp, "Generator hidden layers width", "Prior size")
    _same(hp, "Discriminator hidden layers width", "Prior size")
    return WganModel(n_var, prior=int(hp["Prior size"]), lr=float(hp["Learning rate"]),
                     penalty=float(hp["Gradient regularization"]),
                     n_critic=int(hp.get("n_critic", 5)), batch_size=int(hp.get("batch_size", 64)),
                     critic_hidden_layers=int(hp["Number of hidden layers of discriminator net"]),
                     generator_hidden_layers=int(hp["Number of hidden layers of generator net"]),
                     seed=seed)


BUILDERS = {"qcbm": _qcbm, "rnn": _rnn, "tf": _tf, "vae": _vae, "wgan": _wgan}


def build_model(tag: str, n_var: int, hyperparameters: dict, seed: int | None = 0):
    if tag not in BUILDERS:
        raise ConfigError(f"unknown model tag {tag!r}")
    hp = dict(hyperparameters)
    try:
        model = BUILDERS[tag](n_var, hp, seed)
    except KeyError as exc:
        raise ConfigError(f"{tag}: missing hyperparameter {exc.args[0]!r}") from None
    stated = hp.get("Total number of parameters")
    if stated is not None and int(stated) != model.parameter_count():
        log.warning("%s: built %d parameters, configuration states %s",
                    tag, model.parameter_count(), stated)
    return model
