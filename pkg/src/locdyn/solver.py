"""LocDyn: per-step accelerated minimization of the motion-regularized surrogate.

At each measurement step the prediction ``x_pred = x_hat(k-1) + v*dt`` is
formed from past estimates, then the constant-momentum accelerated gradient
loop runs on ``fhat(x) + lam * |x - x_pred|^2``.  :func:`solve_step` runs the
loop centrally through the kernel backend; :func:`distributed_round_trace`
runs the same iteration node by node through explicit mailboxes and produces
bit-identical iterates.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .convex import ConvexConstants, _positions, compute_constants, g_value
from .errors import (
    DimensionMismatch,
    InvalidParams,
    MissingNeighborValue,
    NumericalDivergence,
    ProtocolViolation,
)
from .measurements import MeasurementSet, OutlierConfig, simulate_measurements, step_rng
from .network import NetworkGraph
from .velocity import PositionHistory, estimate_velocity

INIT_STREAM = 2


@dataclass(frozen=True)
class SolverConfig:
    """Solver policy.

    Iterations stop when the RMS gradient at the extrapolated point drops to
    ``grad_tol`` or after ``max_iters``.  ``init_policy="warm_start"`` starts
    each step from the previous estimate; ``"random_box"`` draws a uniform
    point in the anchors' bounding box at every step.  The first step always
    starts from a random point.
    """

    lam: float = 0.5
    max_iters: int = 500
    grad_tol: float = 1e-6
    init_policy: str = "warm_start"
    velocity_method: str = "smooth_fir"
    fallback: str = "zero"
    lipschitz_bound: str = "spectral"
    backend: str | None = None
    record: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParams("max_iters must be >= 1")
        if self.grad_tol < 0:
            raise InvalidParams("grad_tol must be >= 0")
        if self.init_policy not in ("warm_start", "random_box"):
            raise InvalidParams(f"unknown init policy {self.init_policy!r}")

    def constants(self, graph: NetworkGraph) -> ConvexConstants:
        return compute_constants(graph, self.lam, self.lipschitz_bound)


@dataclass
class SolverStepResult:
    x: np.ndarray
    iterations: int
    grad_norm: float
    messages: int
    iterates: np.ndarray | None = None  # (iterations + 1, n, p) when recorded
    objective: np.ndarray | None = None  # g at each recorded iterate


@dataclass
class EstimateHistory:
    algorithm: str
    x_hat: np.ndarray  # (K, n, p)
    x_pred: np.ndarray | None = None
    vdt: np.ndarray | None = None
    iterations: np.ndarray | None = None
    grad_norm: np.ndarray | None = None
    messages: np.ndarray | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return int(self.x_hat.shape[0])

    def same_as(self, other: EstimateHistory) -> bool:
        return all(
            (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
            for a, b in [
                (self.x_hat, other.x_hat), (self.x_pred, other.x_pred), (self.vdt, other.vdt),
                (self.iterations, other.iterations), (self.grad_norm, other.grad_norm),
            ]
        )


@dataclass(frozen=True)
class _Problem:
    edge_i: np.ndarray
    edge_j: np.ndarray
    d: np.ndarray
    pair_node: np.ndarray
    pair_pos: np.ndarray
    r: np.ndarray

    @classmethod
    def build(cls, meas: MeasurementSet, graph: NetworkGraph) -> _Problem:
        if meas.d.shape != (graph.num_edges,) or meas.r.shape != (graph.num_pairs,):
            raise DimensionMismatch("measurement set does not match the graph")
        return cls(
            edge_i=np.ascontiguousarray(graph.edges[:, 0], dtype=np.intp),
            edge_j=np.ascontiguousarray(graph.edges[:, 1], dtype=np.intp),
            d=np.ascontiguousarray(meas.d, dtype=float),
            pair_node=np.ascontiguousarray(graph.pair_node, dtype=np.intp),
            pair_pos=np.ascontiguousarray(meas.pair_positions(graph), dtype=float),
            r=np.ascontiguousarray(meas.r, dtype=float),
        )


def predict(x_prev, vdt) -> np.ndarray:
    """``x_pred = x_prev + v * dt``."""
    x_prev = np.asarray(x_prev, dtype=float)
    vdt = np.asarray(vdt, dtype=float)
    if x_prev.shape != vdt.shape:
        raise DimensionMismatch(f"shape {x_prev.shape} vs {vdt.shape}")
    return x_prev + vdt


def anchor_box(graph: NetworkGraph) -> tuple[np.ndarray, np.ndarray]:
    a = graph.anchor_positions
    return a.min(axis=0), a.max(axis=0)


def random_box_init(graph: NetworkGraph, rng: np.random.Generator) -> np.ndarray:
    lo, hi = anchor_box(graph)
    return lo + (hi - lo) * rng.random((graph.n, graph.p))


def solve_step(
    meas: MeasurementSet,
    x_pred,
    config: SolverConfig,
    graph: NetworkGraph,
    x_init=None,
    constants: ConvexConstants | None = None,
    rng: np.random.Generator | None = None,
) -> SolverStepResult:
    """Minimize the regularized surrogate for one measurement step.

    Without ``x_init`` the loop starts at ``x_pred`` (``warm_start``) or at a
    random anchor-box point drawn from ``rng`` (``random_box``).
    """
    c = constants or config.constants(graph)
    xt = _positions(x_pred, graph)
    if x_init is None:
        if config.init_policy == "random_box":
            x_init = random_box_init(graph, rng if rng is not None else np.random.default_rng(0))
        else:
            x_init = xt
    x0 = _positions(x_init, graph)
    prob = _Problem.build(meas, graph)
    backend = kernels.get_backend(config.backend)
    record = np.empty((config.max_iters + 1, graph.n, graph.p)) if config.record else None
    x, iters, gn = backend.nesterov(
        x0, prob.edge_i, prob.edge_j, prob.d, prob.pair_node, prob.pair_pos, prob.r,
        c.lam, xt, c.step, c.beta, False, config.max_iters, config.grad_tol, record,
    )
    result = SolverStepResult(x=np.asarray(x), iterations=int(iters), grad_norm=float(gn),
                              messages=2 * graph.num_edges * int(iters))
    if record is not None:
        result.iterates = record[: iters + 1].copy()
        result.objective = np.array([g_value(xk, xt, c.lam, meas, graph) for xk in result.iterates])
    return result


# --------------------------------------------------------------------------
# node-local computation


def _scale(y: list[float], radius: float) -> float:
    sq = y[0] * y[0]
    for c in range(1, len(y)):
        sq = sq + y[c] * y[c]
    nrm = math.sqrt(sq)
    return radius / nrm if nrm > radius else 1.0


def node_gradient(
    i: int,
    w_i,
    neighbor_w: Mapping[int, object],
    meas: MeasurementSet,
    graph: NetworkGraph,
    lam: float,
    x_pred_i,
) -> np.ndarray:
    """Entry ``i`` of the regularized gradient using only node-local data.

    Node ``i`` needs its own point, the points broadcast by its neighbors, the
    ranges it measured, the positions of the anchors it sees and its own
    prediction.  The arithmetic order matches the kernels exactly.
    """
    p = graph.p
    wi = [float(v) for v in w_i]
    acc_e = [0.0] * p
    for j, e in zip(graph.neighbors[i], graph.neighbor_edges[i]):
        try:
            wj = neighbor_w[j]
        except KeyError:
            raise MissingNeighborValue(f"node {i} has no value from neighbor {j}") from None
        y = [wi[c] - float(wj[c]) for c in range(p)]
        s = _scale(y, float(meas.d[e]))
        for c in range(p):
            acc_e[c] = acc_e[c] + (y[c] - y[c] * s)
    acc_a = [0.0] * p
    anchors = meas.anchor_positions(graph)
    for v in np.flatnonzero(graph.pair_node == i):
        a = anchors[graph.pair_anchor[v]]
        y = [wi[c] - float(a[c]) for c in range(p)]
        s = _scale(y, float(meas.r[v]))
        for c in range(p):
            acc_a[c] = acc_a[c] + (y[c] - y[c] * s)
    twolam = 2.0 * lam
    return np.array([acc_e[c] + acc_a[c] + twolam * (wi[c] - float(x_pred_i[c])) for c in range(p)])


class _Inbox(Mapping):
    """Read-guarded view of the values a node received this round."""

    def __init__(self, owner: int, neighbors: tuple[int, ...], log: list):
        self.owner = owner
        self.allowed = frozenset(neighbors)
        self.values: dict[int, np.ndarray] = {}
        self.log = log

    def __getitem__(self, j):
        if j not in self.allowed:
            self.log.append((self.owner, j))
            raise ProtocolViolation(f"node {self.owner} read state of non-neighbor {j}")
        return self.values[j]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


@dataclass
class TraceResult:
    x: np.ndarray
    iterations: int
    grad_norm: float
    messages_per_iter: list[int]
    violations: list[tuple[int, int]]
    iterates: np.ndarray

    @property
    def messages(self) -> int:
        return sum(self.messages_per_iter)


def distributed_round_trace(
    meas: MeasurementSet,
    x_pred,
    config: SolverConfig,
    graph: NetworkGraph,
    x_init=None,
    constants: ConvexConstants | None = None,
) -> TraceResult:
    """Run the per-step iteration as bulk-synchronous per-node rounds.

    Each round every node extrapolates, broadcasts ``w_i`` into its
    neighbors' inboxes (one delivery per incident edge end), then computes its
    gradient entry from its inbox alone and updates.  The stopping test is the
    same global RMS gradient as in :func:`solve_step`, evaluated by a monitor.
    """
    c = constants or config.constants(graph)
    xt = _positions(x_pred, graph)
    x0 = _positions(xt if x_init is None else x_init, graph)
    n, p = graph.n, graph.p
    x = [list(map(float, x0[i])) for i in range(n)]
    x_prev = [row[:] for row in x]
    violations: list[tuple[int, int]] = []
    inboxes = [_Inbox(i, graph.neighbors[i], violations) for i in range(n)]
    msgs: list[int] = []
    iterates = [np.array(x)]
    gn = math.nan
    kappa = 0
    for kappa in range(1, config.max_iters + 1):
        w = [[x[i][cc] + c.beta * (x[i][cc] - x_prev[i][cc]) for cc in range(p)] for i in range(n)]
        delivered = 0
        for box in inboxes:
            box.values.clear()
        for i in range(n):
            for j in graph.neighbors[i]:
                inboxes[j].values[i] = w[i]
                delivered += 1
        msgs.append(delivered)
        grads = [node_gradient(i, w[i], inboxes[i], meas, graph, c.lam, xt[i]) for i in range(n)]
        s = 0.0
        for i in range(n):
            for cc in range(p):
                s = s + float(grads[i][cc]) * float(grads[i][cc])
        gn = math.sqrt(s / (n * p))
        if not math.isfinite(gn):
            raise NumericalDivergence(f"non-finite gradient at iteration {kappa}")
        x_prev = x
        x = [[w[i][cc] - c.step * float(grads[i][cc]) for cc in range(p)] for i in range(n)]
        iterates.append(np.array(x))
        if gn <= config.grad_tol:
            break
    return TraceResult(x=np.array(x), iterations=kappa, grad_norm=gn, messages_per_iter=msgs,
                       violations=violations, iterates=np.array(iterates))


# --------------------------------------------------------------------------
# trajectories


def run_trajectory(
    scenario,
    sigma: float,
    outlier_cfg: OutlierConfig | None,
    config: SolverConfig,
    seed: int,
    measurements: list[MeasurementSet] | None = None,
) -> EstimateHistory:
    """Localize every step of ``scenario``.

    The prior at the first step is the scenario's known start position; later
    priors come from :func:`predict` with velocities estimated from past
    estimates.  ``measurements`` overrides the internally simulated stream.
    """
    graph = scenario.graph
    stream = measurements if measurements is not None else simulate_measurements(scenario, sigma, seed, outlier_cfg)
    if len(stream) != scenario.K:
        raise DimensionMismatch("measurement stream length differs from the scenario")
    consts = config.constants(graph)
    K, n, p = scenario.K, graph.n, graph.p
    x_hat = np.empty((K, n, p))
    x_pred = np.empty((K, n, p))
    vdt = np.zeros((K, n, p))
    iters = np.zeros(K, dtype=np.int64)
    gnorm = np.zeros(K)
    history = PositionHistory(maxlen=9)
    prev = scenario.start
    for k in range(K):
        if k > 0:
            vdt[k] = estimate_velocity(history, k, config.velocity_method, config.fallback, shape=(n, p))
        x_pred[k] = predict(prev, vdt[k])
        if k == 0 or config.init_policy == "random_box":
            x0 = random_box_init(graph, step_rng(seed, k, INIT_STREAM))
        else:
            x0 = prev
        res = solve_step(stream[k], x_pred[k], config, graph, x_init=x0, constants=consts)
        x_hat[k] = res.x
        iters[k] = res.iterations
        gnorm[k] = res.grad_norm
        history.append(k, res.x)
        prev = res.x
    return EstimateHistory(
        algorithm="locdyn", x_hat=x_hat, x_pred=x_pred, vdt=vdt, iterations=iters,
        grad_norm=gnorm, messages=2 * graph.num_edges * iters, seed=seed,
    )
