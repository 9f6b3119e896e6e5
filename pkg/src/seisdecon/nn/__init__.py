"""Minimal reverse-mode autodiff kernel: just the layers the proximal CNN needs."""

from .functional import conv, group_norm
from .layers import Conv, GroupNorm, Module
from .optim import Adam
from .tensor import Tensor, concat, linear_map, mse_loss, relu, sigmoid

__all__ = [
    "Tensor", "Module", "Conv", "GroupNorm", "Adam",
    "conv", "group_norm", "relu", "sigmoid", "mse_loss", "concat", "linear_map",
]
