import numpy as np
import pytest

ACCEPTANCE_LOG = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_psk(rng, shape, M):
    return np.exp(2j * np.pi * rng.integers(0, M, size=shape) / M)


def crandn(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LOG:
        terminalreporter.write_line(line)
