import sys
from fractions import Fraction

import numpy as np
import pytest

from filtcalc.definitions import load_definition
from filtcalc.group import group_law


@pytest.fixture(scope="session")
def heis():
    return load_definition("heisenberg")


@pytest.fixture(scope="session")
def engel():
    return load_definition("engel")


@pytest.fixture(scope="session")
def free6():
    return load_definition("free_step2_rank3")


@pytest.fixture(scope="session")
def heis_law(heis):
    return group_law(heis.algebra)


@pytest.fixture(scope="session")
def engel_law(engel):
    return group_law(engel.algebra)


@pytest.fixture(scope="session")
def free6_law(free6):
    return group_law(free6.algebra)


def random_rational(rng, n, denom=16, span=2):
    return tuple(Fraction(int(rng.integers(-span * denom, span * denom + 1)), denom) for _ in range(n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(module.RESULTS, key=lambda s: (int(s.rstrip("ab")), s)):
        terminalreporter.write_line(module.RESULTS[label])
