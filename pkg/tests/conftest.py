import math

import numpy as np
import pytest
from hypothesis import settings

from wasslab.geometry import build_geometry

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

TWO_PI = 2.0 * math.pi


@pytest.fixture
def flat1d():
    return build_geometry(dim=1, grid=[64])


@pytest.fixture
def weighted1d():
    return build_geometry(dim=1, grid=[64], f_coeffs=[{"k": [1], "cos": 0.3}], m=3)


@pytest.fixture
def weighted2d():
    return build_geometry(dim=2, grid=[32, 32],
                          f_coeffs=[{"k": [1, 0], "cos": 0.2}, {"k": [0, 1], "cos": 0.1}], m=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
