"""Loop-unrolled proximal gradient network with a learned CNN proximal map.

Each of the ``K`` weight-tied blocks takes a gradient step on the data
misfit and hands the result, stacked with the measured trace, to a
five-layer CNN::

    g_k     = x_k + s * A^T (y - A x_k)
    x_{k+1} = CNN([g_k, y])

starting from ``x_0 = y``. The step ``s = 0.15 * sigmoid(eta_raw)`` is
trained jointly with the CNN and can never leave ``(0, 0.15)``.

Records are ``(n, m)`` arrays. A 1D model treats each column as an
independent trace (batch ``(B*m, 1, n)``); a 2D model sees the whole
section (batch ``(B, 1, n, m)``). Time is axis 2 in both layouts.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nn
from .errors import ConfigError, InvalidArgumentError, NumericError
from .metrics import MetricsReport
from .synthetic import denormalize

log = logging.getLogger(__name__)

STEP_CAP = 0.15
HIDDEN = 64


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs.

    ``groups`` is the GroupNorm group count for the hidden layers; the
    single-channel fourth layer always uses one group. ``final_norm`` and
    ``final_relu`` toggle the GroupNorm and ReLU after that fourth layer.
    """

    kappa: int = 5
    K: int = 5
    dims: int = 1
    hidden: int = HIDDEN
    groups: int = 8
    gn_affine: bool = True
    final_norm: bool = True
    final_relu: bool = False

    def __post_init__(self):
        if self.kappa < 1 or self.kappa % 2 == 0:
            raise ConfigError(f"kappa must be odd, got {self.kappa}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.dims not in (1, 2):
            raise ConfigError(f"dims must be 1 or 2, got {self.dims}")
        if self.hidden % self.groups:
            raise ConfigError(f"hidden={self.hidden} not divisible by groups={self.groups}")


class ProxCNN(nn.Module):
    """conv(2->H)+GN+ReLU, 2x conv(H->H)+GN+ReLU, conv(H->1)+GN[+ReLU], conv(1->1, k=1)."""

    def __init__(self, cfg, rng):
        k, d, h = cfg.kappa, cfg.dims, cfg.hidden
        self.cfg = cfg
        self.convs = [
            nn.Conv(2, h, k, d, rng),
            nn.Conv(h, h, k, d, rng),
            nn.Conv(h, h, k, d, rng),
            nn.Conv(h, 1, k, d, rng),
            nn.Conv(1, 1, 1, d, rng),
        ]
        self.norms = [
            nn.GroupNorm(cfg.groups, h, affine=cfg.gn_affine),
            nn.GroupNorm(cfg.groups, h, affine=cfg.gn_affine),
            nn.GroupNorm(cfg.groups, h, affine=cfg.gn_affine),
        ]
        if cfg.final_norm:
            self.norms.append(nn.GroupNorm(1, 1, affine=cfg.gn_affine))

    def forward(self, z):
        for i in range(4):
            z = self.convs[i](z)
            if i < len(self.norms):
                z = self.norms[i](z)
            if i < 3 or self.cfg.final_relu:
                z = nn.relu(z)
        return self.convs[4](z)


def step_size_of(eta_raw):
    return STEP_CAP * float(nn.tensor._sigmoid(np.asarray(eta_raw, dtype=float)))


class UnrolledModel(nn.Module):
    def __init__(self, cfg=None, seed=0, eta_raw_init=0.0):
        self.cfg = cfg if cfg is not None else ModelConfig()
        self.cnn = ProxCNN(self.cfg, np.random.default_rng(seed))
        self.eta_raw = nn.Tensor(np.array(float(eta_raw_init)), requires_grad=True)

    @property
    def K(self):
        return self.cfg.K

    def step_size(self):
        """Effective step ``0.15 * sigmoid(eta_raw)``.

        Strictly inside (0, 0.15) for ``|eta_raw| < 36``; beyond that the
        float64 sigmoid saturates.
        """
        return step_size_of(self.eta_raw.data)

    def _step_tensor(self):
        return nn.sigmoid(self.eta_raw) * STEP_CAP

    def forward(self, y, op, return_iterates=False):
        """Run the K unrolled blocks on a batch ``y`` laid out as described above."""
        y = nn.tensor.as_tensor(y)
        expected_ndim = 3 if self.cfg.dims == 1 else 4
        if y.ndim != expected_ndim or y.shape[1] != 1:
            raise InvalidArgumentError(
                f"{self.cfg.dims}D model expects shape (B, 1, n{', m' if self.cfg.dims == 2 else ''}),"
                f" got {y.shape}")
        if y.shape[2] != op.n:
            raise InvalidArgumentError(f"trace length {y.shape[2]} != operator size {op.n}")

        def A(v):
            return op.apply(v, axis=2)

        def At(v):
            return op.apply_adjoint(v, axis=2)

        s = self._step_tensor()
        x = y
        iterates = []
        for k in range(self.cfg.K):
            residual = y - nn.linear_map(x, A, At)
            g = x + s * nn.linear_map(residual, At, A)
            try:
                x = self.cnn(nn.concat([g, y], axis=1))
            except NumericError as exc:
                raise NumericError(f"non-finite iterate in unroll block {k}") from exc
            iterates.append(x)
        return (x, iterates) if return_iterates else x

    def predict(self, records, op, batch_size=32):
        """Normalized-domain estimates for a list of records (no tape)."""
        out = []
        saved = [(p, p.requires_grad) for p in self.parameters()]
        for p, _ in saved:
            p.requires_grad = False
        try:
            for i in range(0, len(records), batch_size):
                chunk = records[i:i + batch_size]
                y = to_batch([r.y for r in chunk], self.cfg.dims)
                x_hat = self.forward(y, op).data
                out.extend(from_batch(x_hat, [r.y.shape for r in chunk], self.cfg.dims))
        finally:
            for p, flag in saved:
                p.requires_grad = flag
        return out


def to_batch(arrays, dims):
    """Stack ``(n, m)`` arrays into the network layout."""
    if dims == 1:
        cols = [a.T for a in arrays]  # (m, n) each
        return np.concatenate(cols, axis=0)[:, None, :]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise InvalidArgumentError(f"2D batch needs equal shapes, got {shapes}")
    return np.stack(arrays)[:, None, :, :]


def from_batch(batch, shapes, dims):
    if dims == 1:
        out, i = [], 0
        for n, m in shapes:
            out.append(batch[i:i + m, 0, :].T)
            i += m
        return out
    return [b[0] for b in batch]


@dataclass
class TrainConfig:
    """Optimizer and schedule settings.

    ``schedule="cosine"`` anneals the learning rate from ``lr`` to
    ``lr_min`` over the epochs. ``eta_raw_init=None`` keeps whatever step
    parameter the model already has.
    """

    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    eta_raw_init: Optional[float] = None
    schedule: str = "constant"
    lr_min: float = 0.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.schedule not in ("constant", "cosine"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if not 0.0 <= self.lr_min <= self.lr:
            raise ConfigError(f"lr_min must lie in [0, lr], got {self.lr_min}")

    def lr_at(self, epoch):
        """Learning rate for 1-based ``epoch``."""
        if self.schedule == "constant" or self.epochs == 1:
            return self.lr
        frac = (epoch - 1) / (self.epochs - 1)
        return self.lr_min + 0.5 * (self.lr - self.lr_min) * (1.0 + math.cos(math.pi * frac))


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    step_size: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)

    def rows(self):
        return [(i + 1, l, s) for i, (l, s) in enumerate(zip(self.loss, self.step_size))]


def _check_records(records, op, dims):
    if not records:
        raise InvalidArgumentError("empty dataset")
    for r in records:
        if r.x.shape != r.y.shape or r.y.ndim != 2 or r.y.shape[0] != op.n:
            raise ConfigError(
                f"record shape {r.y.shape} incompatible with operator n={op.n}")
        if dims == 2 and r.y.shape != records[0].y.shape:
            raise ConfigError("2D training needs records of one shape")


def train(model, records, op, cfg, optimizer=None, callback=None):
    """Minimize the mean MSE between ``x_K`` and ``x / mag`` over mini-batches.

    Returns ``(history, optimizer)``. ``callback(epoch, loss, step)`` is
    called after each epoch.
    """
    _check_records(records, op, model.cfg.dims)
    if cfg.eta_raw_init is not None:
        model.eta_raw.data = np.array(float(cfg.eta_raw_init))
    params = model.parameters()
    if optimizer is None:
        optimizer = nn.Adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    dims = model.cfg.dims
    history = TrainHistory()
    history.step_trace.append(model.step_size())

    for epoch in range(1, cfg.epochs + 1):
        optimizer.lr = cfg.lr_at(epoch)
        order = rng.permutation(len(records))
        total, count = 0.0, 0
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            chunk = [records[i] for i in order[start:start + cfg.batch_size]]
            y = to_batch([r.y for r in chunk], dims)
            target = to_batch([r.x / r.mag for r in chunk], dims)
            model.zero_grad()
            try:
                loss = nn.mse_loss(model.forward(y, op), target)
            except NumericError as exc:
                raise NumericError(
                    f"training diverged at epoch {epoch}, batch {b}: {exc}") from exc
            loss.backward()
            optimizer.step()
            s = model.step_size()
            if not 0.0 < s < STEP_CAP:
                raise NumericError(f"step size {s} left (0, {STEP_CAP}) at epoch {epoch}")
            history.step_trace.append(s)
            total += loss.item() * len(chunk)
            count += len(chunk)
        mean_loss = total / count
        history.loss.append(mean_loss)
        history.step_size.append(model.step_size())
        log.debug("epoch %d loss %.6g step %.5f", epoch, mean_loss, model.step_size())
        if callback is not None:
            callback(epoch, mean_loss, model.step_size())
    return history, optimizer


def evaluate(model, records, op, batch_size=32):
    """Score denormalized estimates against the true reflectivity."""
    if not records:
        raise InvalidArgumentError("empty test set")
    _check_records(records, op, model.cfg.dims)
    estimates = model.predict(records, op, batch_size)
    report = MetricsReport()
    for r, x_hat in zip(records, estimates):
        report.add(denormalize(x_hat, r.mag), r.x)
    return report
