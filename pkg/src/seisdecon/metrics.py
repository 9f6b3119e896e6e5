"""Reconstruction scores and SNR measurement."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, UndefinedMetricError


def _pair(x_hat, x):
    x_hat = np.asarray(x_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    if x_hat.shape != x.shape:
        raise InvalidArgumentError(f"shape mismatch: {x_hat.shape} vs {x.shape}")
    return x_hat.ravel(), x.ravel()


def mse(x_hat, x):
    """Mean (not summed) squared error over all elements."""
    a, b = _pair(x_hat, x)
    return float(np.mean((a - b) ** 2))


def _unit_peak(v):
    # avoids under/overflow in the norms; every metric here is scale-free per input
    peak = np.max(np.abs(v)) if v.size else 0.0
    return v / peak if peak > 0 else v


def correlation(x_hat, x):
    """Cosine similarity, no mean removal."""
    a, b = _pair(x_hat, x)
    a, b = _unit_peak(a), _unit_peak(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedMetricError("correlation undefined for an all-zero input")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def quality(x_hat, x):
    """Reconstruction quality in dB after projecting out the scale of ``x_hat``.

    Returns ``math.inf`` when ``x_hat`` is colinear with ``x``.
    """
    a, b = _pair(x_hat, x)
    a, b = _unit_peak(a), _unit_peak(b)
    na2 = float(a @ a)
    nb2 = float(b @ b)
    if na2 == 0.0 or nb2 == 0.0:
        raise UndefinedMetricError("quality undefined for an all-zero input")
    residual = b - a * (a @ b) / na2
    rnorm = float(np.linalg.norm(residual))
    if rnorm < 1e-15 * math.sqrt(nb2):
        return math.inf
    return float(10.0 * np.log10(nb2 / rnorm ** 2))


def measured_snr(clean, noisy):
    clean = np.asarray(clean, dtype=float)
    noisy = np.asarray(noisy, dtype=float)
    if clean.shape != noisy.shape:
        raise InvalidArgumentError(f"shape mismatch: {clean.shape} vs {noisy.shape}")
    signal = float(np.sum(clean ** 2))
    noise = float(np.sum((noisy - clean) ** 2))
    if signal == 0.0:
        raise UndefinedMetricError("SNR undefined for an all-zero clean signal")
    if noise == 0.0:
        raise UndefinedMetricError("SNR undefined when noisy equals clean")
    return float(10.0 * np.log10(signal / noise))


@dataclass
class MetricsReport:
    """Per-record scores plus their means.

    ``quality_db`` may hold ``math.inf`` entries; the aggregate is then
    infinite as well.
    """

    mse: list = field(default_factory=list)
    correlation: list = field(default_factory=list)
    quality_db: list = field(default_factory=list)

    def add(self, x_hat, x):
        self.mse.append(mse(x_hat, x))
        self.correlation.append(correlation(x_hat, x))
        self.quality_db.append(quality(x_hat, x))

    @property
    def n_records(self):
        return len(self.mse)

    def aggregate(self):
        if not self.n_records:
            raise InvalidArgumentError("no records scored")
        return {
            "mse": float(np.mean(self.mse)),
            "correlation": float(np.mean(self.correlation)),
            "quality_db": float(np.mean(self.quality_db)),
        }

    def rows(self):
        return list(zip(range(self.n_records), self.mse, self.correlation,
                        self.quality_db))


def score(pairs):
    """Build a MetricsReport from an iterable of ``(x_hat, x)``."""
    report = MetricsReport()
    for x_hat, x in pairs:
        report.add(x_hat, x)
    return report
