import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from locdyn.convex import (
    compute_constants,
    f_value,
    fhat_grad,
    fhat_lipschitz,
    fhat_value,
    g_grad,
    g_value,
    momentum,
    project_ball,
)
from locdyn.errors import DimensionMismatch, NonpositiveLambda
from locdyn.measurements import MeasurementSet
from locdyn.network import build_network
from locdyn.solver import SolverConfig, solve_step

from conftest import random_instance
from oracles import fd_gradient, matrix_fhat_grad

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
vec3 = arrays(float, 3, elements=finite)


@pytest.mark.parametrize("y,c,r,expected", [
    ((0.5, 0), (0, 0), 1.0, (0.5, 0)),
    ((2, 0), (0, 0), 1.0, (1, 0)),
    ((3, 4), (0, 0), 2.5, (1.5, 2.0)),
])
def test_projection_examples(y, c, r, expected):
    np.testing.assert_allclose(project_ball(y, c, r), expected, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(vec3, vec3, vec3, st.floats(0, 50))
def test_projection_idempotent_and_nonexpansive(y, z, c, r):
    py, pz = project_ball(y, c, r), project_ball(z, c, r)
    assert np.linalg.norm(py - c) <= r * (1 + 1e-12) + 1e-12
    np.testing.assert_allclose(project_ball(py, c, r), py, atol=1e-9)
    assert np.linalg.norm(py - pz) <= np.linalg.norm(y - z) * (1 + 1e-12) + 1e-12


def _single_edge(d=1.0):
    g = build_network(2, 2, [(0, 1)], np.zeros((0, 2)))
    return g, MeasurementSet(step=0, d=np.array([d]), r=np.zeros(0))


def test_fhat_single_edge_half_square():
    g, m = _single_edge(1.0)
    for delta in (0.0, 0.25, 2.0):
        assert fhat_value([[0.0, 0.0], [1.0 + delta, 0.0]], m, g) == pytest.approx(0.5 * delta ** 2, abs=1e-15)
    assert fhat_value([[0.0, 0.0], [0.4, 0.0]], m, g) == 0.0


def test_fhat_grad_single_edge():
    # |x1 - x2| = 3 with d = 1: residual 2 pulls the nodes together
    g, m = _single_edge(1.0)
    x = np.array([[0.0, 0.0], [3.0, 0.0]])
    expected = [[-2.0, 0.0], [2.0, 0.0]]
    np.testing.assert_array_equal(fhat_grad(x, m, g), expected)
    np.testing.assert_allclose(fd_gradient(lambda z: fhat_value(z, m, g), x), expected, atol=1e-8)


def test_fhat_grad_zero_inside_balls(rng):
    graph, meas, truth = random_instance(rng, n=5, p=2, noise=0.0)
    slack = MeasurementSet(step=0, d=meas.d + 1.0, r=meas.r + 1.0)
    assert fhat_value(truth, slack, graph) == 0.0
    assert np.all(fhat_grad(truth, slack, graph) == 0.0)


def test_surrogate_tightness(rng):
    for _ in range(50):
        graph, meas, truth = random_instance(rng, n=int(rng.integers(1, 6)), p=int(rng.integers(2, 4)))
        for _ in range(10):
            x = rng.normal(scale=15, size=truth.shape)
            fh, f = fhat_value(x, meas, graph), f_value(x, meas, graph)
            assert 0.0 <= fh <= f + 1e-9 * max(1.0, f)


def test_gradient_matches_matrix_form_and_fd(rng, backend):
    for _ in range(30):
        graph, meas, truth = random_instance(rng, n=int(rng.integers(1, 6)), p=int(rng.integers(2, 4)))
        x = rng.normal(scale=15, size=truth.shape)
        g = fhat_grad(x, meas, graph, backend=backend)
        np.testing.assert_allclose(g, matrix_fhat_grad(x, meas, graph), rtol=1e-12, atol=1e-10)
        fd = fd_gradient(lambda z: fhat_value(z, meas, graph), x)
        assert np.linalg.norm(fd - g) <= 1e-6 * max(np.linalg.norm(g), 1.0)


def test_g_reduces_to_fhat_at_prediction(rng):
    graph, meas, truth = random_instance(rng, n=4, p=2)
    x = rng.normal(size=truth.shape)
    assert g_value(x, x, 0.7, meas, graph) == fhat_value(x, meas, graph)
    np.testing.assert_array_equal(g_grad(x, x, 0.7, meas, graph), fhat_grad(x, meas, graph))
    xt = rng.normal(size=truth.shape)
    fd = fd_gradient(lambda z: g_value(z, xt, 0.7, meas, graph), x)
    np.testing.assert_allclose(g_grad(x, xt, 0.7, meas, graph), fd, rtol=1e-6, atol=1e-6)


def test_flat_vectors_keep_shape(rng):
    graph, meas, truth = random_instance(rng, n=3, p=2)
    flat = truth.ravel()
    assert fhat_grad(flat, meas, graph).shape == flat.shape
    assert fhat_value(flat, meas, graph) == fhat_value(truth, meas, graph)
    with pytest.raises(DimensionMismatch):
        fhat_value(np.zeros(5), meas, graph)


def test_nonpositive_lambda_rejected(rng):
    graph, meas, truth = random_instance(rng)
    for lam in (0.0, -1.0):
        with pytest.raises(NonpositiveLambda):
            g_value(truth, truth, lam, meas, graph)
        with pytest.raises(NonpositiveLambda):
            compute_constants(graph, lam)


def test_large_lambda_pins_prediction(rng):
    graph, meas, truth = random_instance(rng, n=4, p=2, noise=0.0)
    x_pred = truth + rng.normal(scale=3.0, size=truth.shape)
    res = solve_step(meas, x_pred, SolverConfig(lam=1e6), graph)
    assert np.max(np.abs(res.x - x_pred)) < 1e-4


def test_constants_single_edge():
    g, _ = _single_edge()
    c = compute_constants(g, 1.0)
    assert (c.L_fhat, c.L, c.m) == pytest.approx((2.0, 4.0, 2.0), abs=1e-12)
    q = math.sqrt(0.5)
    assert c.beta == pytest.approx((1 - q) / (1 + q), abs=1e-15)
    assert c.beta == pytest.approx(0.17157, abs=1e-5)
    assert c.step == pytest.approx(0.25)


def test_constants_ordering(rng):
    for _ in range(20):
        graph, _, _ = random_instance(rng, n=int(rng.integers(1, 7)))
        for lam in (1e-3, 0.5, 10.0):
            c = compute_constants(graph, lam)
            assert 0 < c.m <= c.L and 0 <= c.beta < 1
            if graph.num_edges or graph.num_pairs:
                assert c.m < c.L
            assert fhat_lipschitz(graph, "degree") >= c.L_fhat - 1e-12


def test_momentum_limits():
    assert momentum(1.0, 1.0) == 0.0
    assert 0.99 < momentum(1e-6, 1.0) < 1.0


def test_smoothness_and_strong_convexity_sample(rng):
    graph, meas, truth = random_instance(rng, n=5, p=2)
    c = compute_constants(graph, 0.5)
    xt = truth + rng.normal(size=truth.shape)
    for _ in range(200):
        x, y = rng.normal(scale=20, size=(2,) + truth.shape)
        dg = g_grad(x, xt, 0.5, meas, graph) - g_grad(y, xt, 0.5, meas, graph)
        dx = x - y
        nx = np.linalg.norm(dx)
        assert np.linalg.norm(dg) <= c.L * nx * (1 + 1e-12)
        assert np.sum(dg * dx) >= c.m * nx ** 2 * (1 - 1e-12)
