import numpy as np
import pytest

from locdyn import kernels
from locdyn.measurements import MeasurementSet, true_ranges
from locdyn.network import build_network


def random_instance(rng, n=4, p=2, m=None, noise=1.0, edge_prob=0.6, box=20.0):
    """Random connected network with noisy ranges around random true positions."""
    m = m if m is not None else p + 2
    truth = rng.uniform(-box / 2, box / 2, size=(n, p))
    anchors = rng.uniform(-box, box, size=(m, p))
    edges = [(i, i + 1) for i in range(n - 1)]  # spanning path keeps it connected
    edges += [(i, j) for i in range(n) for j in range(i + 2, n) if rng.random() < edge_prob]
    vis = [sorted(rng.choice(m, size=rng.integers(0, m + 1), replace=False).tolist()) for _ in range(n)]
    graph = build_network(n, p, edges, anchors, vis)
    d, r = true_ranges(graph, truth)
    d = np.abs(d + noise * rng.normal(size=d.shape))
    r = np.abs(r + noise * rng.normal(size=r.shape))
    return graph, MeasurementSet(step=0, d=d, r=r), truth


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return request.param


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
