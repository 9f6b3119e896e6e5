import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from seisdecon.errors import InvalidArgumentError, UndefinedMetricError
from seisdecon.metrics import MetricsReport, correlation, measured_snr, mse, quality

vectors = arrays(np.float64, 16, elements=st.floats(-10, 10, allow_subnormal=False))


def loop_mse(a, b):
    total = 0.0
    for u, v in zip(a, b):
        total += (u - v) ** 2
    return total / len(a)


def loop_quality(xh, x):
    dot = sum(u * v for u, v in zip(xh, x))
    nh = sum(u * u for u in xh)
    nx = sum(v * v for v in x)
    res = sum((v - u * dot / nh) ** 2 for u, v in zip(xh, x))
    return 10 * math.log10(nx / res)


class TestMSE:
    def test_identical(self, rng):
        x = rng.standard_normal(20)
        assert mse(x, x) == 0.0

    def test_constant_offset(self, rng):
        x = rng.standard_normal(20)
        assert mse(x + 0.3, x) == pytest.approx(0.09, rel=1e-12)

    def test_loop_oracle(self, rng):
        a, b = rng.standard_normal(16), rng.standard_normal(16)
        assert mse(a, b) == pytest.approx(loop_mse(a, b), rel=1e-13)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            mse(np.zeros(3), np.zeros(4))

    @given(a=vectors, b=vectors)
    def test_nonnegative_zero_iff_equal(self, a, b):
        v = mse(a, b)
        assert v >= 0
        if np.array_equal(a, b):
            assert v == 0
        elif np.max(np.abs(a - b)) > 1e-150:  # below this the square underflows
            assert v > 0


class TestCorrelation:
    def test_scaled(self, rng):
        x = rng.standard_normal(10)
        assert correlation(2 * x, x) == pytest.approx(1.0, abs=1e-15)

    def test_negated(self, rng):
        x = rng.standard_normal(10)
        assert correlation(-x, x) == pytest.approx(-1.0, abs=1e-15)

    def test_orthogonal_spikes(self):
        assert correlation(np.eye(5)[0], np.eye(5)[1]) == 0.0

    def test_zero_vector(self):
        with pytest.raises(UndefinedMetricError):
            correlation(np.zeros(4), np.ones(4))

    @given(a=vectors, b=vectors)
    def test_symmetric_bounded(self, a, b):
        if not (np.any(a) and np.any(b)):
            return
        c = correlation(a, b)
        assert c == pytest.approx(correlation(b, a), abs=1e-12)
        assert abs(c) <= 1 + 1e-12


class TestQuality:
    @pytest.mark.parametrize("c", [1.0, -3.0, 1e-3, 250.0])
    def test_colinear_is_infinite(self, rng, c):
        x = rng.standard_normal(30)
        assert quality(c * x, x) == math.inf

    def test_orthogonal_is_zero_db(self):
        assert quality(np.eye(4)[0], np.eye(4)[2]) == 0.0

    def test_formula_oracle(self, rng):
        xh, x = rng.standard_normal(16), rng.standard_normal(16)
        assert quality(xh, x) == pytest.approx(loop_quality(xh, x), rel=1e-12)

    def test_zero_input(self):
        with pytest.raises(UndefinedMetricError):
            quality(np.zeros(3), np.ones(3))

    @settings(max_examples=50)
    @given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 10**6))
    def test_scale_invariant(self, c, seed):
        r = np.random.default_rng(seed)
        xh, x = r.standard_normal(16), r.standard_normal(16)
        assert quality(c * xh, x) == pytest.approx(quality(xh, x), abs=1e-9)


class TestSNR:
    def test_equal_energy(self, rng):
        clean = rng.standard_normal(40)
        e = rng.standard_normal(40)
        e *= np.linalg.norm(clean) / np.linalg.norm(e)
        assert measured_snr(clean, clean + e) == pytest.approx(0.0, abs=1e-12)

    def test_twenty_db(self, rng):
        clean = rng.standard_normal(40)
        e = rng.standard_normal(40)
        e *= 0.1 * np.linalg.norm(clean) / np.linalg.norm(e)
        assert measured_snr(clean, clean + e) == pytest.approx(20.0, abs=1e-12)

    def test_undefined(self):
        with pytest.raises(UndefinedMetricError):
            measured_snr(np.ones(3), np.ones(3))


class TestReport:
    def test_aggregate_is_mean(self, rng):
        rep = MetricsReport()
        pairs = [(rng.standard_normal(8), rng.standard_normal(8)) for _ in range(5)]
        for xh, x in pairs:
            rep.add(xh, x)
        agg = rep.aggregate()
        assert rep.n_records == 5
        assert agg["mse"] == pytest.approx(np.mean([mse(a, b) for a, b in pairs]))
        assert agg["correlation"] == pytest.approx(np.mean([correlation(a, b) for a, b in pairs]))
        assert agg["quality_db"] == pytest.approx(np.mean([quality(a, b) for a, b in pairs]))

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            MetricsReport().aggregate()
