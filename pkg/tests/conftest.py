import numpy as np
import pytest

from sfnet.model import ArchConfig, SFNet
from sfnet.weights import init_weights

# small enough for per-test graph runs, same topology as the default
TINY = ArchConfig(lb_channels=8, band_channels=6, lb_tcm_groups=2, band_tcm_groups=2,
                  dilations=(1, 2, 4), lb_squeeze=8, band_squeeze=8)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_weights():
    return init_weights(TINY, seed=7)


@pytest.fixture(scope="session")
def tiny_model(tiny_weights):
    return SFNet.from_weights(tiny_weights)


@pytest.fixture(scope="session")
def full_weights():
    return init_weights(seed=0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
