import numpy as np
import pytest

from lespectra.geometry import make_uniform_grid


@pytest.fixture
def line():
    return make_uniform_grid((0.0, 1.0), 99)


@pytest.fixture
def square():
    return make_uniform_grid([(0.0, 1.0), (0.0, 1.0)], 15)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
