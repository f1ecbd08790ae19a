from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

EPSILONS = (0.0, math.pi / 16, math.pi / 8, 3 * math.pi / 16, math.pi / 4 - 1e-3)
SATURATIONS = (0.01, 0.3, 1.0, 10.0, 1e3)
DETUNINGS = (-5.0, 0.0, 0.7, 5.0)

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_complex_vector(rng):
    from obe_steady.polarization import ComplexVector3

    return ComplexVector3(tuple(rng.normal(size=3) + 1j * rng.normal(size=3)))
