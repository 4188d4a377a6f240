"""Classical generative models built on the in-house autodiff engine."""
from .base import NeuralModel
from .rnn import RnnModel
from .transformer import TransformerModel
from .vae import VaeModel
from .wgan import WganModel

__all__ = ["NeuralModel", "RnnModel", "TransformerModel", "VaeModel", "WganModel"]
