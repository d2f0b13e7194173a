import numpy as np
import pytest

from entropy_lattice import entropy_model as em
from entropy_lattice.lattice import build_lattice


@pytest.fixture
def quad1():
    return em.quadratic(1, center=[0.5], A=[[1.0]])


@pytest.fixture
def unit1():
    return build_lattice(1, 100, [1], [(0, 1)])


@pytest.fixture
def unit2():
    return build_lattice(2, 20, [1, 1], [(0, 1), (0, 1)])


def flat_model(m=1):
    """S == 0: the pmf is uniform over the lattice."""
    return em.EntropyModel(name="flat", m=m, S=lambda x, N: np.zeros(np.shape(x)[:-1]),
                           s=lambda x: np.zeros(np.shape(x)[:-1]))


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line acceptance verdicts, which are otherwise captured."""
    import sys

    lines = []
    for name, mod in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            lines.extend(getattr(mod, "VERDICTS", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines), key=lambda l: int(l.split()[2].rstrip(':'))):
            terminalreporter.write_line(line)
