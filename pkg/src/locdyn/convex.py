"""Disk-relaxed localization objective, its regularized form, and constants.

Positions are ``(n, p)`` arrays; flattened ``(n * p,)`` vectors are accepted
wherever a position is expected and results keep the caller's shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NonpositiveLambda
from .measurements import MeasurementSet
from .network import NetworkGraph, laplacian_max_eigenvalue


def project_ball(y, center, radius: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto the ball ``{z : |z - center| <= radius}``."""
    y = np.asarray(y, dtype=float)
    center = np.asarray(center, dtype=float)
    u = y - center
    nrm = float(np.linalg.norm(u))
    if nrm <= radius:
        return y.copy()
    return center + u * (radius / nrm)


def _positions(x, graph: NetworkGraph) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size != graph.n * graph.p or (x.ndim == 2 and x.shape != (graph.n, graph.p)) or x.ndim > 2:
        raise DimensionMismatch(f"expected {graph.n}x{graph.p} positions, got shape {x.shape}")
    return np.ascontiguousarray(x.reshape(graph.n, graph.p))


def _check_meas(meas: MeasurementSet, graph: NetworkGraph) -> None:
    if meas.d.shape != (graph.num_edges,) or meas.r.shape != (graph.num_pairs,):
        raise DimensionMismatch("measurement set does not match the graph's edges / anchor pairs")


def _sq_ball_dist(y: np.ndarray, radius: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(y, axis=1)
    return np.maximum(nrm - radius, 0.0) ** 2


def fhat_value(x, meas: MeasurementSet, graph: NetworkGraph) -> float:
    """Sum of halved squared distances of edge displacements / node positions to their balls."""
    x = _positions(x, graph)
    _check_meas(meas, graph)
    e = graph.edges
    total = 0.0
    if len(e):
        total += 0.5 * float(np.sum(_sq_ball_dist(x[e[:, 0]] - x[e[:, 1]], meas.d)))
    if graph.num_pairs:
        total += 0.5 * float(np.sum(_sq_ball_dist(x[graph.pair_node] - meas.pair_positions(graph), meas.r)))
    return total


def f_value(x, meas: MeasurementSet, graph: NetworkGraph) -> float:
    """Nonconvex maximum-likelihood cost (sphere residuals).  Diagnostics only."""
    x = _positions(x, graph)
    _check_meas(meas, graph)
    e = graph.edges
    total = 0.0
    if len(e):
        total += 0.5 * float(np.sum((np.linalg.norm(x[e[:, 0]] - x[e[:, 1]], axis=1) - meas.d) ** 2))
    if graph.num_pairs:
        nrm = np.linalg.norm(x[graph.pair_node] - meas.pair_positions(graph), axis=1)
        total += 0.5 * float(np.sum((nrm - meas.r) ** 2))
    return total


def _kernel_grad(x, meas, graph, lam, x_pred, backend):
    k = kernels.get_backend(backend)
    return k.gradient(
        x, graph.edges[:, 0].copy(), graph.edges[:, 1].copy(), meas.d,
        graph.pair_node, meas.pair_positions(graph), meas.r, lam, x_pred,
    )


def fhat_grad(x, meas: MeasurementSet, graph: NetworkGraph, backend: str | None = None) -> np.ndarray:
    shape = np.shape(x)
    xp = _positions(x, graph)
    _check_meas(meas, graph)
    return _kernel_grad(xp, meas, graph, 0.0, xp, backend).reshape(shape)


def _check_lambda(lam: float) -> None:
    if not lam > 0:
        raise NonpositiveLambda(f"lambda must be positive, got {lam}")


def g_value(x, x_pred, lam: float, meas: MeasurementSet, graph: NetworkGraph) -> float:
    """Regularized objective ``fhat(x) + lam * |x - x_pred|^2``."""
    _check_lambda(lam)
    xp, xt = _positions(x, graph), _positions(x_pred, graph)
    return fhat_value(xp, meas, graph) + lam * float(np.sum((xp - xt) ** 2))


def g_grad(x, x_pred, lam: float, meas: MeasurementSet, graph: NetworkGraph, backend: str | None = None) -> np.ndarray:
    _check_lambda(lam)
    shape = np.shape(x)
    xp, xt = _positions(x, graph), _positions(x_pred, graph)
    _check_meas(meas, graph)
    return _kernel_grad(xp, meas, graph, lam, xt, backend).reshape(shape)


@dataclass(frozen=True)
class ConvexConstants:
    """Step-size and momentum constants for the regularized objective.

    ``lam`` is the ratio of measurement variance to prior variance
    (sigma^2 / varsigma^2); the prior variance itself never appears at runtime.
    """

    lam: float
    L_fhat: float
    L: float
    m: float
    beta: float

    @property
    def step(self) -> float:
        return 1.0 / self.L


def fhat_lipschitz(graph: NetworkGraph, bound: str = "spectral") -> float:
    """Lipschitz constant of the surrogate's gradient.

    ``"spectral"``: lambda_max(Laplacian) + max_i |A_i|.
    ``"degree"``: 2 * max degree + max_i |A_i| (no eigendecomposition; looser).
    """
    max_anchors = max((len(v) for v in graph.anchor_visibility), default=0)
    if bound == "spectral":
        lap = laplacian_max_eigenvalue(graph)
    elif bound == "degree":
        lap = 2.0 * float(graph.degree.max(initial=0))
    else:
        raise ValueError(f"unknown bound {bound!r}")
    return lap + max_anchors


def momentum(m: float, L: float) -> float:
    q = math.sqrt(m / L)
    return (1.0 - q) / (1.0 + q)


def compute_constants(graph: NetworkGraph, lam: float, bound: str = "spectral") -> ConvexConstants:
    _check_lambda(lam)
    L_fhat = fhat_lipschitz(graph, bound)
    L = L_fhat + 2.0 * lam
    m = 2.0 * lam
    return ConvexConstants(lam=lam, L_fhat=L_fhat, L=L, m=m, beta=momentum(m, L))
