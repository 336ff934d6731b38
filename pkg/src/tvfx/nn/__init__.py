"""Minimal reverse-mode differentiation kernel for the effect model."""

from . import checkpoint, conv, init, ops, recurrent, saaf
from .gradcheck import gradient_check
from .layers import DenseLayer, SaafParams, se_block
from .optim import Adam
from .recurrent import LSTMDirection, bilstm
from .tensor import Parameter, Tape, Tensor, stop_gradient

__all__ = [
    "Adam", "DenseLayer", "LSTMDirection", "Parameter", "SaafParams", "Tape", "Tensor",
    "bilstm", "checkpoint", "conv", "gradient_check", "init", "ops", "recurrent", "saaf",
    "se_block", "stop_gradient",
]
