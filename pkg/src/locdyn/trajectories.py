"""Benchmark scenarios: planar lap, descending spiral, lawn mower.

Paths are built from line and arc segments parameterized by arc length;
vehicles move along them with a piecewise-constant speed profile, so the
sampled positions are exact (no numerical integration).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidParams, TooFewAnchors
from .network import NetworkGraph, build_network, network_from_dict


@dataclass(frozen=True, eq=False)
class Scenario:
    """Ground truth for one experiment.

    ``truth[k, i]`` is the true position of node ``i`` at step ``k``
    (``0 <= k < K``), sampled every ``dt`` seconds.
    """

    name: str
    graph: NetworkGraph
    truth: np.ndarray
    dt: float
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return int(self.truth.shape[0])

    @property
    def start(self) -> np.ndarray:
        """Known initial positions (the start marker)."""
        return self.truth[0].copy()

    @property
    def outlier_anchor(self) -> int | None:
        return self.meta.get("outlier_anchor")


# --------------------------------------------------------------------------
# path geometry


@dataclass(frozen=True)
class Line:
    start: tuple[float, float]
    end: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    @property
    def curvature(self) -> float:
        return 0.0

    def at(self, s: float):
        a, b = np.asarray(self.start), np.asarray(self.end)
        u = (b - a) / self.length
        return a + s * u, u


@dataclass(frozen=True)
class Arc:
    """Circular arc; positive ``sweep`` turns counter-clockwise."""

    center: tuple[float, float]
    radius: float
    theta0: float
    sweep: float

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    @property
    def curvature(self) -> float:
        return math.copysign(1.0 / self.radius, self.sweep)

    def at(self, s: float):
        sgn = math.copysign(1.0, self.sweep)
        th = self.theta0 + sgn * s / self.radius
        c = np.asarray(self.center)
        pos = c + self.radius * np.array([math.cos(th), math.sin(th)])
        tangent = sgn * np.array([-math.sin(th), math.cos(th)])
        return pos, tangent


class Path2D:
    def __init__(self, segments: Sequence[Line | Arc]):
        self.segments = list(segments)
        self.bounds = np.concatenate([[0.0], np.cumsum([seg.length for seg in self.segments])])

    @property
    def length(self) -> float:
        return float(self.bounds[-1])

    def segment_index(self, s: float) -> int:
        idx = int(np.searchsorted(self.bounds, s, side="right")) - 1
        return min(max(idx, 0), len(self.segments) - 1)

    def at(self, s: float):
        """Position and unit tangent at arc length ``s``."""
        i = self.segment_index(s)
        return self.segments[i].at(s - self.bounds[i])


def _speed_profile(path: Path2D, base_speed, slow_window=None, slow_factor=1.0):
    """Breakpoints ``(s_edges, speeds)``; ``base_speed(segment) -> speed``."""
    cuts = set(path.bounds.tolist())
    if slow_window is not None:
        cuts.update(min(max(v, 0.0), path.length) for v in slow_window)
    edges = np.array(sorted(cuts))
    speeds = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        v = base_speed(path.segments[path.segment_index(mid)])
        if slow_window is not None and slow_window[0] <= mid <= slow_window[1]:
            v *= slow_factor
        speeds.append(v)
    return edges, np.array(speeds)


def _arc_length_at_times(edges, speeds, times, loop_length=None):
    seg_t = np.diff(edges) / speeds
    t_edges = np.concatenate([[0.0], np.cumsum(seg_t)])
    period = t_edges[-1]
    out = np.empty(len(times))
    for n, t in enumerate(times):
        laps = 0
        if loop_length is not None:
            laps, t = divmod(t, period)
        i = min(int(np.searchsorted(t_edges, t, side="right")) - 1, len(speeds) - 1)
        out[n] = laps * (loop_length or 0.0) + edges[i] + speeds[i] * (t - t_edges[i])
    return out, period


# --------------------------------------------------------------------------
# anchors


def place_anchors(bbox, count: int, p: int) -> np.ndarray:
    """Deterministic anchor layout framing the box ``bbox = (lo, hi)``.

    Box corners come first (in ``itertools.product`` order, so index 0 is the
    all-minimum corner); remaining anchors go round-robin onto the box edges,
    longest edges first, equally spaced along each edge.  With fewer than
    ``2**p`` anchors a simplex containing the box is used instead.
    """
    if count < p + 1:
        raise TooFewAnchors(f"{count} anchors cannot frame a {p}-D region (need {p + 1})")
    lo, hi = (np.asarray(v, dtype=float).reshape(p) for v in bbox)
    width = hi - lo
    if count < 2 ** p:
        simplex = [lo.copy()]
        for i in range(p):
            v = lo.copy()
            v[i] += p * width[i]
            simplex.append(v)
        corners = [np.array(c) for c in itertools.product(*zip(lo, hi))]
        return np.array(simplex + corners[1:count - p])

    corners = [np.array(c) for c in itertools.product(*zip(lo, hi))]
    # box edges: corner pairs differing in exactly one coordinate
    box_edges = []
    for a, b in itertools.combinations(range(len(corners)), 2):
        diff = np.flatnonzero(corners[a] != corners[b])
        if len(diff) == 1:
            box_edges.append((a, b, int(diff[0])))
    order = sorted(range(len(box_edges)), key=lambda e: -width[box_edges[e][2]])
    per_edge = [0] * len(box_edges)
    for t in range(count - len(corners)):
        per_edge[order[t % len(order)]] += 1
    extra = []
    for e in order:
        a, b, _ = box_edges[e]
        c = per_edge[e]
        for j in range(1, c + 1):
            extra.append(corners[a] + (corners[b] - corners[a]) * (j / (c + 1)))
    return np.array(corners + extra)


def in_anchor_hull(points: np.ndarray, anchors: np.ndarray, tol: float = 1e-9) -> bool:
    """Hull membership for layouts produced by :func:`place_anchors`."""
    p = anchors.shape[1]
    pts = np.asarray(points).reshape(-1, p)
    if anchors.shape[0] >= 2 ** p:
        lo, hi = anchors.min(axis=0), anchors.max(axis=0)
        return bool(np.all(pts >= lo - tol) and np.all(pts <= hi + tol))
    # simplex: barycentric coordinates of the first p + 1 anchors
    v0 = anchors[0]
    T = (anchors[1:p + 1] - v0).T
    lam = np.linalg.solve(T, (pts - v0).T)
    return bool(np.all(lam >= -tol) and np.all(lam.sum(axis=0) <= 1 + tol))


def _finish(name, truth, dt, anchor_count, margin, meta, visibility=None) -> Scenario:
    p = truth.shape[2]
    n = truth.shape[1]
    pts = truth.reshape(-1, p)
    bbox = (pts.min(axis=0) - margin, pts.max(axis=0) + margin)
    anchors = place_anchors(bbox, anchor_count, p)
    if not in_anchor_hull(pts, anchors):
        raise InvalidParams("anchors do not contain the trajectory")
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    graph = build_network(n, p, edges, anchors, visibility)
    truth.setflags(write=False)
    return Scenario(name=name, graph=graph, truth=truth, dt=dt, meta=meta)


def _check_positive(**kw):
    for k, v in kw.items():
        if v is None:
            continue
        if not v > 0:
            raise InvalidParams(f"{k} must be positive, got {v}")


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class LapParams:
    half_length: float = 10.0  # half of each straight
    turn_radius: float = 10.0
    spacing: float = 3.0  # lateral distance between neighbouring vehicles
    vehicles: int = 3
    speed: float = 1.0
    slowdown_factor: float = 0.3
    slowdown_at: tuple[float, float] = (-15.0, -5.0)
    slowdown_length: float = 10.0
    dt: float = 1.0
    K: int | None = None  # None: one full lap
    anchors: int = 12
    margin: float = 5.0


def lap_path(half_length: float, turn_radius: float) -> Path2D:
    a, R = half_length, turn_radius
    return Path2D([
        Line((-a, -R), (a, -R)),
        Arc((a, 0.0), R, -math.pi / 2, math.pi),
        Line((a, R), (-a, R)),
        Arc((-a, 0.0), R, math.pi / 2, math.pi),
    ])


def gen_lap(params: LapParams = LapParams(), visibility=None) -> Scenario:
    """Counter-clockwise rounded-rectangle lap driven by a side-by-side formation.

    On turns the formation centre slows so that the outermost vehicle never
    exceeds the nominal speed; inside the slowdown window every speed is
    further multiplied by ``slowdown_factor``.
    """
    pr = params
    _check_positive(speed=pr.speed, dt=pr.dt, K=pr.K, turn_radius=pr.turn_radius, slowdown_factor=pr.slowdown_factor)
    if pr.half_length < 0 or pr.vehicles < 1 or pr.slowdown_factor > 1:
        raise InvalidParams("invalid lap parameters")
    path = lap_path(pr.half_length, pr.turn_radius)
    offsets = (np.arange(pr.vehicles) - (pr.vehicles - 1) / 2.0) * pr.spacing
    if np.max(np.abs(offsets), initial=0.0) >= pr.turn_radius:
        raise InvalidParams("formation wider than the turn radius")

    def base_speed(seg):
        k = seg.curvature
        return pr.speed / max(abs(1.0 - o * k) for o in offsets)

    # slowdown window centred on the path point closest to slowdown_at
    grid = np.linspace(0.0, path.length, 4001)
    target = np.asarray(pr.slowdown_at)
    s0 = grid[np.argmin([np.linalg.norm(path.at(s)[0] - target) for s in grid])]
    window = None
    if pr.slowdown_factor < 1.0:
        window = (s0 - pr.slowdown_length / 2, s0 + pr.slowdown_length / 2)
    edges, speeds = _speed_profile(path, base_speed, window, pr.slowdown_factor)
    _, period = _arc_length_at_times(edges, speeds, [0.0])
    K = pr.K if pr.K is not None else int(math.floor(period / pr.dt)) + 1
    s, _ = _arc_length_at_times(edges, speeds, np.arange(K) * pr.dt, loop_length=path.length)

    truth = np.empty((K, pr.vehicles, 2))
    for k, sk in enumerate(s):
        pos, tan = path.at(sk % path.length)
        normal = np.array([-tan[1], tan[0]])
        truth[k] = pos + offsets[:, None] * normal
    meta = {"kind": "lap", "outlier_anchor": 0, "params": _params_dict(pr),
            "slowdown_window": list(window) if window else None, "path_length": path.length}
    return _finish("lap", truth, pr.dt, pr.anchors, pr.margin, meta, visibility)


@dataclass(frozen=True)
class SpiralParams:
    radius: float = 10.0
    angular_rate: float = 0.1  # rad/s
    descent_rate: float = 0.1  # m/s, positive = descending
    start_depth: float = 0.0
    vehicles: int = 1
    dt: float = 1.0
    K: int = 126  # two turns at the default rate
    anchors: int = 16
    margin: float = 5.0


def gen_spiral(params: SpiralParams = SpiralParams(), visibility=None) -> Scenario:
    """Helix about the z axis whose z coordinate decreases at ``descent_rate``.

    Several vehicles are spread evenly in phase around the helix.
    """
    pr = params
    _check_positive(radius=pr.radius, dt=pr.dt, K=pr.K)
    if pr.descent_rate < 0 or pr.vehicles < 1 or pr.angular_rate == 0:
        raise InvalidParams("invalid spiral parameters")
    t = np.arange(pr.K) * pr.dt
    truth = np.empty((pr.K, pr.vehicles, 3))
    for i in range(pr.vehicles):
        th = pr.angular_rate * t + 2 * math.pi * i / pr.vehicles
        truth[:, i, 0] = pr.radius * np.cos(th)
        truth[:, i, 1] = pr.radius * np.sin(th)
        truth[:, i, 2] = pr.start_depth - pr.descent_rate * t
    meta = {"kind": "spiral", "outlier_anchor": 0, "params": _params_dict(pr), "planar": pr.descent_rate == 0,
            "speed": math.hypot(pr.radius * pr.angular_rate, pr.descent_rate)}
    return _finish("spiral", truth, pr.dt, pr.anchors, pr.margin, meta, visibility)


@dataclass(frozen=True)
class LawnmowerParams:
    swath_length: float = 30.0
    lane_spacing: float = 5.0
    lanes: int = 4
    speed: float = 1.0
    vehicles: int = 1
    dt: float = 1.0
    K: int | None = None  # None: the whole path
    anchors: int = 6
    margin: float = 5.0


def lawnmower_path(swath_length: float, lane_spacing: float, lanes: int) -> Path2D:
    segs: list[Line | Arc] = []
    r = lane_spacing / 2.0
    for lane in range(lanes):
        y = lane * lane_spacing
        eastward = lane % 2 == 0
        a, b = (0.0, swath_length) if eastward else (swath_length, 0.0)
        segs.append(Line((a, y), (b, y)))
        if lane < lanes - 1:
            if eastward:
                segs.append(Arc((swath_length, y + r), r, -math.pi / 2, math.pi))
            else:
                segs.append(Arc((0.0, y + r), r, -math.pi / 2, -math.pi))
    return Path2D(segs)


def gen_lawnmower(params: LawnmowerParams = LawnmowerParams(), visibility=None) -> Scenario:
    """Boustrophedon survey: ``lanes`` parallel lanes joined by semicircular U-turns."""
    pr = params
    _check_positive(speed=pr.speed, dt=pr.dt, K=pr.K, swath_length=pr.swath_length, lane_spacing=pr.lane_spacing)
    if pr.lanes < 1 or pr.vehicles < 1:
        raise InvalidParams("invalid lawn mower parameters")
    path = lawnmower_path(pr.swath_length, pr.lane_spacing, pr.lanes)
    K = pr.K if pr.K is not None else int(math.floor(path.length / (pr.speed * pr.dt))) + 1
    # extra vehicles trail the leader by two lane spacings of arc length
    truth = np.empty((K, pr.vehicles, 2))
    for i in range(pr.vehicles):
        s = np.clip(np.arange(K) * pr.dt * pr.speed - i * 2 * pr.lane_spacing, 0.0, path.length)
        for k, sk in enumerate(s):
            truth[k, i] = path.at(sk)[0]
    meta = {"kind": "lawnmower", "params": _params_dict(pr), "outlier_anchor": 0, "path_length": path.length}
    return _finish("lawnmower", truth, pr.dt, pr.anchors, pr.margin, meta, visibility)


_PARAMS = {"lap": LapParams, "spiral": SpiralParams, "lawnmower": LawnmowerParams}
_GENERATORS = {"lap": gen_lap, "spiral": gen_spiral, "lawnmower": gen_lawnmower}


def _params_dict(pr) -> dict:
    d = asdict(pr)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def make_scenario(kind: str, **overrides) -> Scenario:
    """Generate a scenario by name with keyword overrides of its parameters."""
    try:
        cls, gen = _PARAMS[kind], _GENERATORS[kind]
    except KeyError:
        raise InvalidParams(f"unknown scenario kind {kind!r}") from None
    fields = cls.__dataclass_fields__
    unknown = set(overrides) - set(fields)
    if unknown:
        raise InvalidParams(f"unknown {kind} parameters: {sorted(unknown)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    return gen(cls(**kw))


# --------------------------------------------------------------------------
# CSV round trip


def save_scenario(scenario: Scenario, out_dir: str | Path) -> Path:
    """Write ``truth.csv`` (step, node_id, x, y[, z]) and ``scenario.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = scenario.graph.p
    cols = ["x", "y", "z"][:p]
    with open(out / "truth.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "node_id", *cols])
        for k in range(scenario.K):
            for i in range(scenario.graph.n):
                w.writerow([k, i, *(repr(float(v)) for v in scenario.truth[k, i])])
    meta = {
        "name": scenario.name,
        "dt": scenario.dt,
        "K": scenario.K,
        "outlier_anchor": scenario.outlier_anchor,
        "network": scenario.graph.to_dict(),
        "meta": scenario.meta,
    }
    (out / "scenario.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return out


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario directory (or the path of its ``scenario.json``)."""
    path = Path(path)
    root = path.parent if path.is_file() else path
    meta = json.loads((root / "scenario.json").read_text(encoding="utf-8"))
    graph = network_from_dict(meta["network"])
    truth = np.full((meta["K"], graph.n, graph.p), np.nan)
    with open(root / "truth.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            truth[int(row[0]), int(row[1])] = [float(v) for v in row[2:2 + graph.p]]
    if not np.all(np.isfinite(truth)):
        raise InvalidParams("truth.csv does not cover every step and node")
    inner = dict(meta.get("meta", {}))
    inner["outlier_anchor"] = meta.get("outlier_anchor")
    truth.setflags(write=False)
    return Scenario(name=meta["name"], graph=graph, truth=truth, dt=float(meta["dt"]), meta=inner)
