"""Comparison estimators: one-shot static localization and a range-only Kalman filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .convex import _positions, fhat_lipschitz
from .errors import CovarianceNotPSD, DimensionMismatch, InvalidParams
from .measurements import MeasurementSet
from .network import NetworkGraph
from .solver import EstimateHistory, SolverConfig, _Problem


def static_solve(meas: MeasurementSet, graph: NetworkGraph, config: SolverConfig = SolverConfig(),
                 x_init=None) -> np.ndarray:
    """Minimize the surrogate alone, one step at a time, with no temporal prior.

    The surrogate is convex but not strongly convex, so the momentum follows
    the ``(k - 1) / (k + 2)`` schedule with step ``1 / L_fhat``.  The default
    start is every node at the anchor centroid.
    """
    L = fhat_lipschitz(graph, config.lipschitz_bound)
    if L <= 0:
        raise InvalidParams("graph has neither edges nor anchor ranges")
    if x_init is None:
        x_init = np.tile(graph.anchor_positions.mean(axis=0), (graph.n, 1))
    x0 = _positions(x_init, graph)
    prob = _Problem.build(meas, graph)
    x, _, _ = kernels.get_backend(config.backend).nesterov(
        x0, prob.edge_i, prob.edge_j, prob.d, prob.pair_node, prob.pair_pos, prob.r,
        0.0, np.zeros_like(x0), 1.0 / L, 0.0, True, config.max_iters, config.grad_tol, None,
    )
    return np.asarray(x)


def run_static(scenario, stream: list[MeasurementSet], config: SolverConfig = SolverConfig()) -> EstimateHistory:
    x_hat = np.array([static_solve(m, scenario.graph, config) for m in stream])
    return EstimateHistory(algorithm="static", x_hat=x_hat)


# --------------------------------------------------------------------------
# Kalman filter


@dataclass
class KalmanState:
    """Joint constant-velocity state of all nodes.

    ``mean`` is ``(n, 2p)``: row ``i`` holds node ``i``'s position followed by
    its velocity.  ``cov`` is the ``(2pn, 2pn)`` covariance of the flattened
    mean.  ``accel_psd`` is the white-acceleration spectral density (m^2/s^3)
    and ``sigma`` the range noise standard deviation.
    """

    mean: np.ndarray
    cov: np.ndarray
    accel_psd: float = 0.05
    sigma: float = 1.0

    @classmethod
    def initial(cls, positions, accel_psd: float = 0.05, sigma: float = 1.0,
                pos_var: float = 1.0, vel_var: float = 1.0) -> KalmanState:
        positions = np.asarray(positions, dtype=float)
        n, p = positions.shape
        mean = np.hstack([positions, np.zeros((n, p))])
        diag = np.tile(np.r_[np.full(p, pos_var), np.full(p, vel_var)], n)
        return cls(mean=mean, cov=np.diag(diag), accel_psd=accel_psd, sigma=sigma)

    @property
    def positions(self) -> np.ndarray:
        p = self.mean.shape[1] // 2
        return self.mean[:, :p].copy()


def _transition(n: int, p: int, dt: float, q: float):
    F1 = np.eye(2 * p)
    F1[:p, p:] = dt * np.eye(p)
    Q1 = q * np.block([
        [dt ** 3 / 3 * np.eye(p), dt ** 2 / 2 * np.eye(p)],
        [dt ** 2 / 2 * np.eye(p), dt * np.eye(p)],
    ])
    eye = np.eye(n)
    return np.kron(eye, F1), np.kron(eye, Q1)


def kalman_predict(state: KalmanState, dt: float) -> KalmanState:
    n, two_p = state.mean.shape
    F, Q = _transition(n, two_p // 2, dt, state.accel_psd)
    mean = (F @ state.mean.ravel()).reshape(n, two_p)
    return KalmanState(mean, F @ state.cov @ F.T + Q, state.accel_psd, state.sigma)


def kalman_update(state: KalmanState, meas: MeasurementSet, graph: NetworkGraph) -> KalmanState:
    """Linearize every range about the current mean and apply one joint update."""
    n, two_p = state.mean.shape
    p = two_p // 2
    if (n, p) != (graph.n, graph.p):
        raise DimensionMismatch("Kalman state does not match the graph")
    pos = state.mean[:, :p]
    dim = n * two_p
    rows, z, h = [], [], []
    for (i, j), dij in zip(graph.edges, meas.d):
        diff = pos[i] - pos[j]
        nrm = float(np.linalg.norm(diff))
        u = diff / nrm if nrm > 0 else np.zeros(p)
        row = np.zeros(dim)
        row[i * two_p:i * two_p + p] = u
        row[j * two_p:j * two_p + p] = -u
        rows.append(row)
        z.append(dij)
        h.append(nrm)
    anchors = meas.anchor_positions(graph)
    for i, k, rik in zip(graph.pair_node, graph.pair_anchor, meas.r):
        diff = pos[i] - anchors[k]
        nrm = float(np.linalg.norm(diff))
        u = diff / nrm if nrm > 0 else np.zeros(p)
        row = np.zeros(dim)
        row[i * two_p:i * two_p + p] = u
        rows.append(row)
        z.append(rik)
        h.append(nrm)
    if not rows:
        return state
    H = np.array(rows)
    R = state.sigma ** 2 * np.eye(len(rows))
    P = state.cov
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    innov = np.asarray(z) - np.asarray(h)
    mean = state.mean.ravel() + K @ innov
    IKH = np.eye(dim) - K @ H
    cov = IKH @ P @ IKH.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)
    return KalmanState(mean.reshape(n, two_p), cov, state.accel_psd, state.sigma)


def _check_psd(cov: np.ndarray) -> None:
    lo = float(np.linalg.eigvalsh(cov)[0])
    if lo < -1e-9:
        raise CovarianceNotPSD(f"covariance eigenvalue {lo:.3e}")


def kalman_step(state: KalmanState, meas: MeasurementSet, graph: NetworkGraph, dt: float):
    """Constant-velocity predict followed by the linearized range update.

    Returns ``(new_state, positions)``.
    """
    new = kalman_update(kalman_predict(state, dt), meas, graph)
    _check_psd(new.cov)
    return new, new.positions


def run_kalman(scenario, stream: list[MeasurementSet], sigma: float, accel_psd: float = 0.05,
               check_psd: bool = False) -> EstimateHistory:
    """Filter a whole stream, initialized at the start position with zero velocity.

    The first step is an update only (the start position is the prior for it).
    """
    state = KalmanState.initial(scenario.start, accel_psd=accel_psd, sigma=max(sigma, 1e-6))
    x_hat = np.empty((scenario.K,) + scenario.start.shape)
    for k, meas in enumerate(stream):
        if k == 0:
            state = kalman_update(state, meas, scenario.graph)
        else:
            state = kalman_update(kalman_predict(state, scenario.dt), meas, scenario.graph)
        if check_psd:
            _check_psd(state.cov)
        x_hat[k] = state.positions
    return EstimateHistory(algorithm="kalman", x_hat=x_hat, extra={"accel_psd": accel_psd})
