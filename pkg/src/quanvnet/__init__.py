"""Hybrid quantum-classical image classification toolkit.

A dense state-vector circuit simulator drives a quanvolution feature
extractor (2x2 patches through a seeded 4-qubit random circuit), whose
outputs feed a small from-scratch CNN trained with Adam on cross-entropy.
The same CNN trained on raw grayscale images serves as the classical
baseline.
"""

from .estimators import CNNClassifier, QuanvolutionTransformer
from .network import Network, TrainConfig
from .qsim import Circuit, GateKind, GateOp
from .quanv import QuanvFilterSpec, quanv_image

__all__ = [
    "CNNClassifier",
    "Circuit",
    "GateKind",
    "GateOp",
    "Network",
    "QuanvFilterSpec",
    "QuanvolutionTransformer",
    "TrainConfig",
    "quanv_image",
]

__version__ = "0.1.0"
