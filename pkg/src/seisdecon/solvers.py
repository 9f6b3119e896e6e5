"""Proximal-gradient baselines for regularized least squares.

Solves ``min_x 0.5 * ||y - A x||^2 + gamma * r(x)`` with

* ``ista``  -- iterative soft thresholding, r = l1 norm
* ``fista`` -- ISTA with Nesterov momentum
* ``gd_l2`` -- plain gradient descent, r = 0.5 * ||x||^2

``y`` may be a single trace of length n or an ``(n, m)`` block; columns are
independent problems solved together (the objective is their sum).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergedError, InvalidArgumentError

VARIANTS = ("ista", "fista", "gd_l2")
DIVERGENCE_LIMIT = 1e12


def soft_threshold(v, lam):
    """Elementwise ``sign(v) * max(|v| - lam, 0)``."""
    if lam < 0:
        raise InvalidArgumentError(f"threshold must be >= 0, got {lam}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def lipschitz(op, iters=20, seed=0):
    """Estimate the largest eigenvalue of ``A.T A`` by power iteration."""
    v = np.random.default_rng(seed).standard_normal(op.n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = op.apply_adjoint(op.apply(v))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


@dataclass
class SolverConfig:
    """``eta=None`` selects ``0.9 / L`` with L from :func:`lipschitz`."""

    gamma: float
    eta: Optional[float] = None
    max_iters: int = 1000
    tol: float = 1e-8
    variant: str = "ista"

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidArgumentError(f"gamma must be >= 0, got {self.gamma}")
        if self.eta is not None and not self.eta > 0:
            raise InvalidArgumentError(f"eta must be > 0, got {self.eta}")
        if self.max_iters < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0:
            raise InvalidArgumentError(f"tol must be >= 0, got {self.tol}")
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}")


@dataclass
class SolveReport:
    x_hat: np.ndarray
    iterations_run: int
    objective_trace: list = field(default_factory=list)
    eta: float = 0.0
    converged: bool = False


def objective(y, op, x, gamma, variant):
    misfit = 0.5 * float(np.sum((y - op.apply(x)) ** 2))
    if variant == "gd_l2":
        return misfit + gamma * 0.5 * float(np.sum(x ** 2))
    return misfit + gamma * float(np.sum(np.abs(x)))


def solve(y, op, cfg, x0=None):
    y = np.asarray(y, dtype=float)
    if y.ndim == 0 or y.shape[0] != op.n:
        raise InvalidArgumentError(f"expected leading dimension {op.n}, got {y.shape}")
    eta = cfg.eta if cfg.eta is not None else 0.9 / max(lipschitz(op), 1e-300)
    gamma, variant = cfg.gamma, cfg.variant

    x = op.apply_adjoint(y) if x0 is None else np.array(x0, dtype=float)
    z, t = x, 1.0
    trace = []
    converged = False
    k = 0
    for k in range(1, cfg.max_iters + 1):
        base = z if variant == "fista" else x
        step = base + eta * op.apply_adjoint(y - op.apply(base))
        if variant == "gd_l2":
            x_new = step - eta * gamma * base
        else:
            x_new = soft_threshold(step, eta * gamma)

        if variant == "fista":
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new

        f = objective(y, op, x_new, gamma, variant)
        trace.append(f)
        if not np.isfinite(f) or f > DIVERGENCE_LIMIT:
            raise DivergedError(k, f)
        change = np.linalg.norm(x_new - x)
        scale = np.linalg.norm(x_new)
        x = x_new
        if change <= cfg.tol * scale:
            converged = True
            break
    return SolveReport(x_hat=x, iterations_run=k, objective_trace=trace,
                       eta=eta, converged=converged)


def solve_records(records, op, cfg):
    """Solve every record in one batched call; returns normalized-domain estimates.

    Each record's ``(n, m)`` columns become columns of a single block.
    """
    ys = [r.y for r in records]
    widths = [y.shape[1] for y in ys]
    block = np.concatenate(ys, axis=1)
    x_hat = solve(block, op, cfg).x_hat
    return np.split(x_hat, np.cumsum(widths)[:-1], axis=1)


def tune_gamma(records, op, gammas, variant="ista", max_iters=500, tol=1e-8):
    """Pick the gamma with the lowest mean MSE against ``record.x`` after denormalization.

    Returns ``(best_gamma, {gamma: mse})``.
    """
    if not len(gammas):
        raise InvalidArgumentError("empty gamma grid")
    eta = 0.9 / lipschitz(op)
    scores = {}
    for g in gammas:
        cfg = SolverConfig(gamma=float(g), eta=eta, max_iters=max_iters, tol=tol,
                           variant=variant)
        est = solve_records(records, op, cfg)
        scores[float(g)] = float(np.mean(
            [np.mean((r.mag * xh - r.x) ** 2) for r, xh in zip(records, est)]))
    best = min(scores, key=scores.get)
    return best, scores
