import cmath

import numpy as np
import pytest

from hypermix.fixtures import build_group, build_system
from hypermix.moebius import MoebiusMap


def random_loxodromic(rng, n):
    """n random determinant-one maps with c != 0 and |trace^2 - 4| well away from 0."""
    out = []
    while len(out) < n:
        a, b, c = rng.normal(size=3) + 1j * rng.normal(size=3)
        # pick d so that the trace is large enough to be loxodromic
        t = rng.uniform(2.5, 6.0) * cmath.exp(1j * rng.uniform(-0.6, 0.6))
        d = t - a
        det = a * d - b * c
        if abs(det) < 1e-3 or abs(c) < 1e-2:
            continue
        m = MoebiusMap(a, b, c, d)
        if abs(m.trace**2 - 4) > 1.0 and abs(m.c) > 1e-2:
            out.append(m)
    return out


@pytest.fixture(scope="session")
def schottky2():
    return build_group("schottky2")[0]


@pytest.fixture(scope="session")
def schottky3():
    return build_group("schottky3")[0]


@pytest.fixture(scope="session")
def coded_system():
    return build_system("schottky3_coded")


@pytest.fixture(scope="session")
def bernoulli_system():
    return build_system("bernoulli")[0]


@pytest.fixture(scope="session")
def rank_one_system():
    return build_system("rank_one")[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    lines = getattr(test_acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
