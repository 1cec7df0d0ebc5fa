import os
from pathlib import Path

import numpy as np
import pytest

from prnk.graph_io import Graph, build_transition
from prnk.google import GoogleOperator


def random_graph(rng, n, mean_degree=5.0, dangling_frac=0.1):
    """Random digraph: ``dangling_frac`` of nodes get no out-links, the rest ~Poisson(mean_degree) >= 1."""
    dangling = rng.random(n) < dangling_frac
    src, dst = [], []
    for i in range(n):
        if dangling[i]:
            continue
        k = max(1, min(n - 1, rng.poisson(mean_degree)))
        targets = rng.choice(np.delete(np.arange(n), i), size=k, replace=False)
        src.extend([i] * k)
        dst.extend(targets.tolist())
    return Graph.from_edges(n, src, dst)


def dense_pagerank(A, tol=1e-13, maxit=1_000_000):
    """Power iteration on the assembled Google matrix."""
    n = A.shape[0]
    x = np.full(n, 1.0 / n)
    for _ in range(maxit):
        y = A @ x
        y /= y.sum()
        if np.abs(y - x).sum() < tol:
            return y
        x = y
    raise RuntimeError("dense oracle did not converge")


def google(graph, alpha=0.85, v=None):
    return GoogleOperator(build_transition(graph), alpha, v)


def dataset_path(name):
    """Locate a downloaded dataset under $PRNK_DATA or ./data; None when absent."""
    roots = [os.environ.get("PRNK_DATA"), Path(__file__).resolve().parents[1] / "data"]
    for root in roots:
        if not root:
            continue
        for suffix in ("", ".txt", ".txt.gz", ".mtx", ".mtx.gz", ".prnk"):
            p = Path(root) / f"{name}{suffix}"
            if p.is_file():
                return p
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cycle3():
    return Graph.from_edges(3, [0, 1, 2], [1, 2, 0])


@pytest.fixture
def dangling2():
    # node 1 has no out-links
    return Graph.from_edges(2, [0], [1], ids=[10, 20])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
