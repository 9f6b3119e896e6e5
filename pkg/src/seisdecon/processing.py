"""Post-processing for field sections: gain control and patch tiling."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

DEFAULT_AGC_WINDOW = 101
DEFAULT_AGC_EPS = 1e-8


@dataclass(frozen=True)
class AgcConfig:
    window: int = DEFAULT_AGC_WINDOW
    epsilon: float = DEFAULT_AGC_EPS

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidArgumentError(f"AGC window must be odd and >= 1, got {self.window}")
        if not self.epsilon > 0:
            raise InvalidArgumentError(f"AGC epsilon must be > 0, got {self.epsilon}")


def agc(x, cfg=None):
    """Divide each sample by the RMS of a centered window plus epsilon.

    Works along axis 0 of a trace or an ``(n, m)`` section; the window is
    clipped (not padded) at both ends.
    """
    cfg = cfg or AgcConfig()
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if cfg.window > n:
        raise InvalidArgumentError(f"AGC window {cfg.window} exceeds trace length {n}")
    half = cfg.window // 2
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x * x, axis=0)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    counts = (hi - lo).reshape((n,) + (1,) * (x.ndim - 1))
    energy = np.maximum(csum[hi] - csum[lo], 0.0)
    rms = np.sqrt(energy / counts)
    return x / (rms + cfg.epsilon)


@dataclass(frozen=True)
class PatchLayout:
    """Where each tile came from; enough to undo :func:`mute_and_pad`."""

    shape: tuple
    patch_n: int
    patch_m: int
    origins: tuple


def mute_and_pad(grid, patch_n, patch_m):
    """Cut a section into non-overlapping ``patch_n x patch_m`` tiles.

    Tiles hanging over the bottom or right edge are zero padded. NaN
    samples (missing traces) are muted to zero first.
    """
    grid = np.nan_to_num(np.asarray(grid, dtype=float), nan=0.0)
    if grid.ndim != 2:
        raise InvalidArgumentError(f"expected an (n, m) section, got shape {grid.shape}")
    if patch_n < 1 or patch_m < 1:
        raise InvalidArgumentError("patch sizes must be >= 1")
    n, m = grid.shape
    patches, origins = [], []
    for i in range(0, n, patch_n):
        for j in range(0, m, patch_m):
            tile = np.zeros((patch_n, patch_m))
            block = grid[i:i + patch_n, j:j + patch_m]
            tile[:block.shape[0], :block.shape[1]] = block
            patches.append(tile)
            origins.append((i, j))
    return patches, PatchLayout((n, m), patch_n, patch_m, tuple(origins))


def reassemble(patches, layout):
    if len(patches) != len(layout.origins):
        raise InvalidArgumentError(
            f"{len(patches)} patches for a layout of {len(layout.origins)}")
    n, m = layout.shape
    out = np.zeros((n + layout.patch_n, m + layout.patch_m))
    for tile, (i, j) in zip(patches, layout.origins):
        out[i:i + layout.patch_n, j:j + layout.patch_m] = tile
    return out[:n, :m]
