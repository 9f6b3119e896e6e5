"""Convolution and group normalization with hand-written backward passes.

Layout is ``(batch, channels, *spatial)`` with one spatial axis (1D) or
two (2D). Convolution is cross-correlation, stride 1, symmetric zero
padding.
"""

from itertools import product

import numpy as np

from ..errors import InvalidArgumentError
from .tensor import _node, as_tensor


def _window(offset, size):
    return (slice(None), slice(None)) + tuple(
        slice(o, o + s) for o, s in zip(offset, size))


def conv(x, weight, bias=None, padding=0):
    """Cross-correlate ``x`` (B, C, *S) with ``weight`` (O, C, *K).

    Output spatial size is ``S + 2 * padding - K + 1``.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    nd = weight.ndim - 2
    if x.ndim != nd + 2:
        raise InvalidArgumentError(
            f"input of shape {x.shape} does not match a {nd}D kernel {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise InvalidArgumentError(
            f"input has {x.shape[1]} channels, kernel expects {weight.shape[1]}")
    ksize = weight.shape[2:]
    for s, k in zip(x.shape[2:], ksize):
        if s < k:
            raise InvalidArgumentError(
                f"spatial size {x.shape[2:]} smaller than kernel {ksize}")
    pad = [(0, 0), (0, 0)] + [(padding, padding)] * nd
    xp = np.pad(x.data, pad)
    out_size = tuple(s + 2 * padding - k + 1 for s, k in zip(x.shape[2:], ksize))
    offsets = list(product(*[range(k) for k in ksize]))

    w = weight.data
    acc = np.zeros((w.shape[0], x.shape[0]) + out_size)
    for off in offsets:
        acc += np.tensordot(w[(slice(None), slice(None)) + off],
                            xp[_window(off, out_size)], axes=([1], [1]))
    out = np.moveaxis(acc, 0, 1)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape((1, -1) + (1,) * nd)
        parents.append(bias)
    spatial_axes = tuple(range(2, 2 + nd))

    def backward(g):
        go = np.moveaxis(g, 1, 0)
        gx = gw = None
        if x.requires_grad:
            gxp = np.zeros((xp.shape[1], xp.shape[0]) + xp.shape[2:])
            for off in offsets:
                gxp[_window(off, out_size)] += np.tensordot(
                    w[(slice(None), slice(None)) + off], go, axes=([0], [0]))
            gxp = np.moveaxis(gxp, 0, 1)
            inner = tuple(slice(padding, padding + s) for s in x.shape[2:])
            gx = gxp[(slice(None), slice(None)) + inner]
        if weight.requires_grad:
            gw = np.zeros_like(w)
            batch_spatial = (1,) + tuple(a for a in range(2, 2 + nd))
            xs_axes = (0,) + spatial_axes
            for off in offsets:
                gw[(slice(None), slice(None)) + off] = np.tensordot(
                    go, xp[_window(off, out_size)], axes=(batch_spatial, xs_axes))
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0,) + spatial_axes))
        return tuple(grads)

    return _node(out, parents, backward)


def group_norm(x, num_groups, scale=None, shift=None, eps=1e-5):
    """Normalize each (sample, group) over its channels and spatial extent."""
    x = as_tensor(x)
    b, c = x.shape[:2]
    if c % num_groups:
        raise InvalidArgumentError(f"{c} channels not divisible into {num_groups} groups")
    nd = x.ndim - 2
    xg = x.data.reshape(b, num_groups, -1)
    mean = xg.mean(axis=-1, keepdims=True)
    var = xg.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat_g = (xg - mean) * inv
    xhat = xhat_g.reshape(x.shape)
    cshape = (1, c) + (1,) * nd
    reduce_axes = (0,) + tuple(range(2, 2 + nd))

    parents = [x]
    out = xhat
    if scale is not None:
        scale, shift = as_tensor(scale), as_tensor(shift)
        out = xhat * scale.data.reshape(cshape) + shift.data.reshape(cshape)
        parents += [scale, shift]

    def backward(g):
        gxhat = g * scale.data.reshape(cshape) if scale is not None else g
        gg = gxhat.reshape(b, num_groups, -1)
        gx = inv * (gg - gg.mean(axis=-1, keepdims=True)
                    - xhat_g * (gg * xhat_g).mean(axis=-1, keepdims=True))
        grads = [gx.reshape(x.shape)]
        if scale is not None:
            grads += [(g * xhat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)]
        return tuple(grads)

    return _node(out, parents, backward)
