import numpy as np
import pytest

from locdyn import kernels
from locdyn.errors import NumericalDivergence
from locdyn.solver import _Problem

from conftest import random_instance

needs_native = pytest.mark.skipif(kernels.native_backend is None, reason="extension not built")


def _args(graph, meas):
    pr = _Problem.build(meas, graph)
    return pr.edge_i, pr.edge_j, pr.d, pr.pair_node, pr.pair_pos, pr.r


def test_backend_selection():
    assert "python" in kernels.available_backends()
    assert kernels.get_backend("python") is kernels.python_backend
    assert kernels.get_backend() is kernels.backend
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_ball_residuals_examples():
    y = np.array([[0.5, 0.0], [2.0, 0.0], [3.0, 4.0]])
    res = kernels.python_backend.ball_residuals(y, np.array([1.0, 1.0, 2.5]))
    np.testing.assert_allclose(res, [[0, 0], [1, 0], [1.5, 2.0]], atol=1e-15)


def test_gradient_single_edge_closed_form(backend):
    k = kernels.get_backend(backend)
    w = np.array([[0.0], [3.0]])
    g = k.gradient(w, np.array([0]), np.array([1]), np.array([1.0]), np.zeros(0, dtype=np.intp),
                   np.zeros((0, 1)), np.zeros(0), 0.0, w)
    np.testing.assert_array_equal(g, [[-2.0], [2.0]])


@needs_native
@pytest.mark.parametrize("p", [2, 3])
def test_native_matches_python_bitwise(p):
    rng = np.random.default_rng(7 + p)
    for _ in range(25):
        graph, meas, truth = random_instance(rng, n=int(rng.integers(1, 7)), p=p)
        args = _args(graph, meas)
        w = rng.normal(scale=10, size=(graph.n, p))
        xt = rng.normal(scale=10, size=(graph.n, p))
        lam = float(rng.uniform(0.01, 3))
        gp = kernels.python_backend.gradient(w, *args, lam, xt)
        gn = kernels.native_backend.gradient(w, *args, lam, xt)
        assert gp.tobytes() == np.asarray(gn).tobytes()
        assert kernels.python_backend.rms(gp) == kernels.native_backend.rms(gn)


@needs_native
@pytest.mark.parametrize("fista", [False, True])
def test_native_nesterov_iterates_bitwise(fista):
    rng = np.random.default_rng(11)
    for _ in range(10):
        graph, meas, truth = random_instance(rng, n=5, p=2)
        args = _args(graph, meas)
        x0 = rng.normal(size=(graph.n, 2))
        xt = truth + rng.normal(size=truth.shape)
        recs = []
        for k in (kernels.python_backend, kernels.native_backend):
            rec = np.full((201, graph.n, 2), np.nan)
            x, it, gn = k.nesterov(x0, *args, 0.3, xt, 0.05, 0.6, fista, 200, 1e-9, rec)
            recs.append((np.asarray(x).tobytes(), it, gn, rec[: it + 1].tobytes()))
        assert recs[0] == recs[1]


def test_divergence_is_reported(backend):
    rng = np.random.default_rng(3)
    graph, meas, truth = random_instance(rng, n=4, p=2, noise=0.0)
    args = _args(graph, meas)
    x0 = truth + 5.0
    with pytest.raises(NumericalDivergence):
        kernels.get_backend(backend).nesterov(x0, *args, 1.0, truth, 50.0, 0.9, False, 5000, 0.0, None)
