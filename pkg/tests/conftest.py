import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlcalib import FractionalPower, Lattice, build_weights

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance lines collected during the session and echoed in the terminal summary
ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def lat1():
    return Lattice.box(1.0, (-8, 7), (-3, 2))


@pytest.fixture
def lat2():
    return Lattice.box(0.5, ((-6, 5), (-6, 5)), ((-2, 1), (-2, 1)))


@pytest.fixture
def w1(lat1):
    return build_weights(lat1, FractionalPower(0.5, dimension=1))


@pytest.fixture
def w2(lat2):
    return build_weights(lat2, FractionalPower(0.5, dimension=2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
