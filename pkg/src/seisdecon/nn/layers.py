"""Parameterized layers and a tiny module container."""

import numpy as np

from ..errors import InvalidArgumentError
from . import functional as F
from .tensor import Tensor


class Module:
    """Holds parameters as attributes; submodules are discovered recursively."""

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + key, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv(Module):
    """Same-size convolution (stride 1, padding ``(kernel_size - 1) // 2``)."""

    def __init__(self, in_channels, out_channels, kernel_size, dims=1, rng=None):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise InvalidArgumentError(f"kernel_size must be odd, got {kernel_size}")
        if dims not in (1, 2):
            raise InvalidArgumentError(f"dims must be 1 or 2, got {dims}")
        rng = np.random.default_rng() if rng is None else rng
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dims = dims
        self.padding = (kernel_size - 1) // 2
        shape = (out_channels, in_channels) + (kernel_size,) * dims
        fan_in = in_channels * kernel_size ** dims
        bound = np.sqrt(6.0 / fan_in)  # Kaiming-uniform, ReLU gain
        self.weight = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def forward(self, x):
        return F.conv(x, self.weight, self.bias, self.padding)


class GroupNorm(Module):
    def __init__(self, num_groups, channels, eps=1e-5, affine=True):
        if channels % num_groups:
            raise InvalidArgumentError(
                f"{channels} channels not divisible into {num_groups} groups")
        if not eps > 0:
            raise InvalidArgumentError(f"eps must be > 0, got {eps}")
        self.num_groups = num_groups
        self.channels = channels
        self.eps = eps
        self.affine = affine
        if affine:
            self.scale = Tensor(np.ones(channels), requires_grad=True)
            self.shift = Tensor(np.zeros(channels), requires_grad=True)
        else:
            self.scale = self.shift = None

    def forward(self, x):
        return F.group_norm(x, self.num_groups, self.scale, self.shift, self.eps)
