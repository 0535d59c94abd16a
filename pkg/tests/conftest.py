import numpy as np
import pytest

from hmatlr.blocktree import Admissibility, build_block_tree
from hmatlr.cluster import build_cluster_tree

ACCEPTANCE_LINES = []


def make_tree(n, rho, adm="weak", eta=1.0):
    ctree = build_cluster_tree(n, rho)
    return ctree, build_block_tree(ctree, Admissibility(adm, eta))


def dominant(n, seed=0, scale=1.0):
    """Random strictly diagonally dominant matrix."""
    rng = np.random.default_rng(seed)
    M = rng.uniform(-scale, scale, size=(n, n))
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, np.abs(M).sum(axis=1) + 1.0)
    return M


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
