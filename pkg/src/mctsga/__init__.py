"""MCTS-guided genetic optimisation of feedforward network weights."""

from ._kernels import BACKEND
from .genome import Genome, Population, decode, encode, init_population
from .network import MlpModel, MlpSpec, TrainConfig, init_model, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Genome",
    "MlpModel",
    "MlpSpec",
    "Population",
    "TrainConfig",
    "decode",
    "encode",
    "init_model",
    "init_population",
    "train",
]
