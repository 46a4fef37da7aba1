import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from anisomg.mesh import MeshSpec, build_rotated_uniform, refine_regular

settings.register_profile("anisomg", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("anisomg")

OMEGAS = [0.0, math.pi / 6, math.pi / 4]


@pytest.fixture(scope="session")
def hierarchies():
    """``(N, omega) -> (coarse, fine, hierarchy)`` for N in {4, 8}."""
    out = {}
    for n in (4, 8):
        for w in OMEGAS:
            coarse = build_rotated_uniform(MeshSpec(n, w))
            fine, h = refine_regular(coarse)
            out[n, w] = (coarse, fine, h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def report():
    """Record one PASS/FAIL/WARN line per acceptance criterion."""
    def emit(line: str):
        print(line)
        ACCEPTANCE_LINES.append(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
