import numpy as np
import pytest

from seisdecon.forward import build_operator, make_ricker


def dense_toeplitz(w, n, center):
    """Reference matrix built entry by entry: column j holds w with its peak on row j."""
    A = np.zeros((n, n))
    for j in range(n):
        for k, wk in enumerate(w):
            i = j + k - center
            if 0 <= i < n:
                A[i, j] = wk
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ricker_op64():
    return build_operator(make_ricker(40.0, 0.002, 25), 64)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
