"""Random sparse reflectivity and paired (reflectivity, trace) datasets."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .forward import corrupt


@dataclass(frozen=True)
class ReflectivitySpec:
    """Sampling parameters for sparse spike reflectivity.

    Each trace gets a uniform number of spikes in ``sparsity_range``, at
    uniformly random positions at least ``min_gap`` samples apart, with
    amplitudes uniform in ``+-[a_lo, a_hi]``. For ``m > 1`` each trace
    reuses its neighbour's spikes shifted by at most ``lateral_coherence``
    samples; when that jitter is nonzero, spikes also die or spawn with
    probability ``turnover`` per spike per trace.
    """

    n: int = 352
    m: int = 1
    sparsity_range: tuple = (3, 40)
    amplitude_range: tuple = (0.1, 1.0)
    min_gap: int = 3
    lateral_coherence: int = 1
    turnover: float = 0.02
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.sparsity_range
        a_lo, a_hi = self.amplitude_range
        if self.n < 1 or self.m < 1:
            raise InvalidArgumentError(f"n and m must be >= 1, got {self.n}, {self.m}")
        if not 0 < lo <= hi < self.n:
            raise InvalidArgumentError(
                f"need 0 < min_spikes <= max_spikes < n, got {self.sparsity_range}, n={self.n}")
        if not 0 < a_lo <= a_hi:
            raise InvalidArgumentError(
                f"need 0 < a_lo <= a_hi, got {self.amplitude_range}")
        if self.min_gap < 0 or self.lateral_coherence < 0:
            raise InvalidArgumentError("min_gap and lateral_coherence must be >= 0")
        if not 0.0 <= self.turnover <= 1.0:
            raise InvalidArgumentError(f"turnover must lie in [0, 1], got {self.turnover}")
        if hi * (self.min_gap + 1) > self.n:
            raise InvalidArgumentError(
                f"{hi} spikes with min_gap={self.min_gap} do not fit in n={self.n}")


def _gap(spec):
    return max(spec.min_gap, 1)


def _random_positions(rng, n, k, gap):
    # uniform over all k-subsets with pairwise spacing >= gap
    slots = n - (k - 1) * (gap - 1)
    base = np.sort(rng.choice(slots, size=k, replace=False))
    return base + np.arange(k) * (gap - 1)


def _fits(pos, taken, gap):
    return all(abs(pos - q) >= gap for q in taken)


def _next_trace(rng, spec, positions, amps):
    n, gap, jitter = spec.n, _gap(spec), spec.lateral_coherence
    lo, hi = spec.sparsity_range
    new_pos, new_amp = [], []
    order = rng.permutation(len(positions))
    for i in order:
        p = int(positions[i])
        if jitter > 0 and len(positions) - 1 >= lo and rng.random() < spec.turnover:
            continue
        cand = min(max(p + int(rng.integers(-jitter, jitter + 1)), 0), n - 1) if jitter else p
        if _fits(cand, new_pos, gap):
            new_pos.append(cand)
        elif _fits(p, new_pos, gap):
            new_pos.append(p)
        else:
            continue
        new_amp.append(amps[i])
    if jitter > 0:
        births = int(np.sum(rng.random(len(positions)) < spec.turnover))
        for _ in range(births):
            if len(new_pos) >= hi:
                break
            cand = int(rng.integers(n))
            if _fits(cand, new_pos, gap):
                new_pos.append(cand)
                new_amp.append(_random_amplitudes(rng, spec, 1)[0])
    # jitter collisions can drop spikes below the floor; refill
    while len(new_pos) < lo:
        cand = int(rng.integers(n))
        if _fits(cand, new_pos, gap):
            new_pos.append(cand)
            new_amp.append(_random_amplitudes(rng, spec, 1)[0])
    idx = np.argsort(new_pos)
    return np.asarray(new_pos)[idx], np.asarray(new_amp)[idx]


def _random_amplitudes(rng, spec, k):
    a_lo, a_hi = spec.amplitude_range
    sign = rng.choice([-1.0, 1.0], size=k)
    return sign * rng.uniform(a_lo, a_hi, size=k)


def sample_reflectivity(spec, rng=None):
    """Draw one ``(n, m)`` reflectivity section."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    lo, hi = spec.sparsity_range
    x = np.zeros((spec.n, spec.m))
    k = int(rng.integers(lo, hi + 1))
    positions = _random_positions(rng, spec.n, k, _gap(spec))
    amps = _random_amplitudes(rng, spec, k)
    x[positions, 0] = amps
    for j in range(1, spec.m):
        positions, amps = _next_trace(rng, spec, positions, amps)
        x[positions, j] = amps
    return x


def decimate(x, stride):
    """Keep every ``stride``-th time sample, giving a denser spike sequence."""
    if int(stride) != stride or stride < 1:
        raise InvalidArgumentError(f"stride must be a positive integer, got {stride}")
    return np.asarray(x)[::int(stride)]


@dataclass
class DatasetRecord:
    x: np.ndarray
    y: np.ndarray
    mag: float
    snr_db: Optional[float] = None

    @property
    def shape(self):
        return self.x.shape


def normalize(y_raw):
    """Scale a trace (or section) to unit peak amplitude; returns ``(y, mag)``."""
    mag = float(np.max(np.abs(y_raw)))
    if mag == 0.0:
        raise InvalidArgumentError("cannot normalize an all-zero trace")
    return y_raw / mag, mag


def denormalize(x_hat, mag):
    if not mag > 0:
        raise InvalidArgumentError(f"magnification must be > 0, got {mag}")
    return mag * np.asarray(x_hat, dtype=float)


def record_rngs(spec_seed, noise_seed, index):
    """Independent generators for record ``index``: (reflectivity, noise)."""
    r = np.random.default_rng(np.random.SeedSequence(spec_seed, spawn_key=(index, 0)))
    e = np.random.default_rng(np.random.SeedSequence(noise_seed, spawn_key=(index, 1)))
    return r, e


def make_record(spec, noise, op, index):
    rng_x, rng_e = record_rngs(spec.seed, noise.seed, index)
    x = sample_reflectivity(spec, rng_x)
    y_raw = corrupt(op.apply(x), noise, rng=rng_e)
    y, mag = normalize(y_raw)
    # the mean is deliberately kept: zeros in x must stay zeros
    return DatasetRecord(x=x, y=y, mag=mag, snr_db=noise.snr_db)


def make_dataset(spec, noise, count, op, start=0):
    """Generate ``count`` records; record ``i`` depends only on the seeds and ``start + i``."""
    if count < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    if op.n != spec.n:
        raise InvalidArgumentError(f"operator size {op.n} != spec.n {spec.n}")
    return [make_record(spec, noise, op, start + i) for i in range(count)]


def stack(records):
    """Arrays ``(x, y, mag)`` of shapes ``(N, n, m)``, ``(N, n, m)``, ``(N,)``."""
    if not records:
        raise InvalidArgumentError("empty dataset")
    x = np.stack([r.x for r in records])
    y = np.stack([r.y for r in records])
    mag = np.array([r.mag for r in records])
    return x, y, mag
