import sys

import numpy as np
import pytest

from alsp.problems import ProblemSpec, generate
from alsp.sparse import SparseMatrix
from alsp.system import SaddleSystem


def make_system(G, B, f=None, g=None):
    G = np.atleast_2d(np.asarray(G, dtype=float))
    B = np.asarray(B, dtype=float).reshape(G.shape[0], -1)
    n, m = B.shape
    f = np.ones(n) if f is None else f
    g = np.zeros(m) if g is None else g
    return SaddleSystem(SparseMatrix.from_dense(G), SparseMatrix.from_dense(B), f, g)


@pytest.fixture
def toy():
    """G = I2, B = e1, f = (1, 0), g = -1; solution x = (1, 0), y = 0."""
    return make_system(np.eye(2), [[1.0], [0.0]], [1.0, 0.0], [-1.0])


@pytest.fixture(scope="session")
def stokes4():
    return generate(ProblemSpec("stokes_mac", grid=4))


@pytest.fixture(scope="session")
def stokes8():
    return generate(ProblemSpec("stokes_mac", grid=8))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
