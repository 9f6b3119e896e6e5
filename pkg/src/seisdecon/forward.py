"""Source wavelets, the Toeplitz convolution operator and noise injection.

A trace is modeled as ``y = A x + noise`` where ``A`` is the n-by-n
convolution matrix whose column ``j`` holds the wavelet centered on row
``j``. The operator never builds that matrix unless asked to.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError

DEFAULT_FREQ = 40.0
DEFAULT_DT = 1.0 / 500.0
DEFAULT_HALF_WIDTH = 25
DENSE_LIMIT = 1024


@dataclass(frozen=True)
class Wavelet:
    samples: np.ndarray
    dt: float
    peak_frequency: float

    def __len__(self):
        return len(self.samples)

    @property
    def center(self):
        """Index of the peak sample, used as time zero."""
        return int(np.argmax(np.abs(self.samples)))


def ricker_value(t, peak_frequency):
    """Zero-phase Ricker pulse evaluated at time(s) ``t``."""
    arg = (np.pi * peak_frequency * np.asarray(t, dtype=float)) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def make_ricker(peak_frequency=DEFAULT_FREQ, dt=DEFAULT_DT,
                half_width=DEFAULT_HALF_WIDTH):
    """Sampled Ricker wavelet of length ``2 * half_width + 1``.

    The pulse is symmetric with its unit peak on the center sample.
    """
    if not peak_frequency > 0:
        raise InvalidArgumentError(f"peak_frequency must be > 0, got {peak_frequency}")
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt}")
    if int(half_width) != half_width or half_width < 1:
        raise InvalidArgumentError(f"half_width must be an integer >= 1, got {half_width}")
    half_width = int(half_width)
    t = np.arange(-half_width, half_width + 1) * dt
    w = ricker_value(t, peak_frequency)
    return Wavelet(samples=w, dt=float(dt), peak_frequency=float(peak_frequency))


def impulse_wavelet(dt=DEFAULT_DT):
    return Wavelet(samples=np.ones(1), dt=dt, peak_frequency=np.inf)


class ConvOperator:
    """Matrix-free n-by-n Toeplitz convolution with a fixed wavelet.

    Column ``j`` of the implied matrix is the wavelet placed so that its
    peak sits on row ``j``; rows falling outside ``[0, n)`` are dropped.
    ``apply`` and ``apply_adjoint`` act along ``axis`` of any array whose
    length there is ``n``, so a 2D section is processed trace by trace.
    """

    def __init__(self, wavelet, n):
        if isinstance(wavelet, Wavelet):
            w = np.asarray(wavelet.samples, dtype=float)
        else:
            w = np.asarray(wavelet, dtype=float)
            wavelet = Wavelet(samples=w, dt=DEFAULT_DT, peak_frequency=np.nan)
        if w.ndim != 1 or len(w) < 1:
            raise InvalidArgumentError("wavelet must be a non-empty 1D array")
        if int(n) != n or n < 1:
            raise InvalidArgumentError(f"n must be a positive integer, got {n}")
        if len(w) > n:
            raise InvalidArgumentError(
                f"wavelet length {len(w)} exceeds operator size n={n}")
        self.wavelet = wavelet
        self.n = int(n)
        self.center_offset = wavelet.center
        self._w = w
        # (tap, lag) pairs with nonzero weight; lag = tap - center
        self._taps = [(float(w[k]), k - self.center_offset)
                      for k in range(len(w)) if w[k] != 0.0]

    def __repr__(self):
        return f"ConvOperator(n={self.n}, d={len(self._w)}, center={self.center_offset})"

    @property
    def shape(self):
        return (self.n, self.n)

    def _check(self, x, axis):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[axis] != self.n:
            raise InvalidArgumentError(
                f"expected length {self.n} along axis {axis}, got shape {x.shape}")
        return np.moveaxis(x, axis, 0)

    def apply(self, x, axis=0):
        """Return ``A @ x`` along ``axis``."""
        xm = self._check(x, axis)
        out = np.zeros_like(xm)
        n = self.n
        for wk, lag in self._taps:
            # y[i] += w[k] * x[i - lag]
            if lag >= 0:
                out[lag:] += wk * xm[:n - lag]
            else:
                out[:n + lag] += wk * xm[-lag:]
        return np.moveaxis(out, 0, axis)

    def apply_adjoint(self, y, axis=0):
        """Return ``A.T @ y`` along ``axis``."""
        ym = self._check(y, axis)
        out = np.zeros_like(ym)
        n = self.n
        for wk, lag in self._taps:
            # x[j] += w[k] * y[j + lag]
            if lag >= 0:
                out[:n - lag] += wk * ym[lag:]
            else:
                out[-lag:] += wk * ym[:n + lag]
        return np.moveaxis(out, 0, axis)

    def dense(self):
        """Materialize the matrix (only for n <= 1024)."""
        if self.n > DENSE_LIMIT:
            raise InvalidArgumentError(
                f"dense materialization limited to n <= {DENSE_LIMIT}, got {self.n}")
        return self.apply(np.eye(self.n))


def build_operator(wavelet, n):
    return ConvOperator(wavelet, n)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise at an exact SNR; ``snr_db=None`` means noiseless."""

    snr_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise InvalidArgumentError(f"snr_db must be finite, got {self.snr_db}")

    @property
    def noiseless(self):
        return self.snr_db is None


def corrupt(y_clean, spec, rng=None):
    """Add white Gaussian noise rescaled so the SNR equals ``spec.snr_db`` exactly.

    ``rng`` overrides the generator seeded from ``spec.seed``.
    """
    y_clean = np.asarray(y_clean, dtype=float)
    if spec.noiseless:
        return y_clean
    energy = float(np.sum(y_clean ** 2))
    if energy == 0.0:
        raise InvalidArgumentError("cannot set an SNR on an all-zero signal")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(y_clean.shape)
    target = energy / 10.0 ** (spec.snr_db / 10.0)
    noise *= np.sqrt(target / np.sum(noise ** 2))
    return y_clean + noise
