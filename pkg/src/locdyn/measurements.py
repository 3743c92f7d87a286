"""Noisy range generation and outlier contamination.

Randomness is drawn from PCG64 streams keyed by ``SeedSequence((seed, step,
stream))``, so any step can be regenerated independently of the others and
steps can be sampled in any order or in parallel with identical results.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import BadProbability, InvalidParams, StepOutOfRange

if TYPE_CHECKING:
    from .network import NetworkGraph
    from .trajectories import Scenario

NOISE_STREAM = 0
OUTLIER_STREAM = 1


def step_rng(seed: int, step: int, stream: int = NOISE_STREAM) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), int(step), int(stream)))))


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Ranges at one time step.

    ``d`` is aligned with ``graph.edges`` (one value per undirected edge, so
    ``d_ij == d_ji`` by construction) and ``r`` / ``outlier_flags`` with the
    graph's node-anchor pairs.  ``anchors`` optionally overrides the graph's
    static anchor positions for this step.
    """

    step: int
    d: np.ndarray
    r: np.ndarray
    outlier_flags: np.ndarray = field(default=None)
    anchors: np.ndarray | None = None

    def __post_init__(self):
        if self.outlier_flags is None:
            object.__setattr__(self, "outlier_flags", np.zeros(self.r.shape, dtype=bool))

    def anchor_positions(self, graph: NetworkGraph) -> np.ndarray:
        return graph.anchor_positions if self.anchors is None else self.anchors

    def pair_positions(self, graph: NetworkGraph) -> np.ndarray:
        """``(V, p)`` anchor position for every node-anchor pair."""
        return np.ascontiguousarray(self.anchor_positions(graph)[graph.pair_anchor])

    def edge_dict(self, graph: NetworkGraph) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(v) for (i, j), v in zip(graph.edges, self.d)}

    def anchor_dict(self, graph: NetworkGraph) -> dict[tuple[int, int], float]:
        return {(int(i), int(k)): float(v) for i, k, v in zip(graph.pair_node, graph.pair_anchor, self.r)}

    def same_as(self, other: MeasurementSet) -> bool:
        return (
            self.step == other.step
            and np.array_equal(self.d, other.d)
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.outlier_flags, other.outlier_flags)
        )


def true_ranges(graph: NetworkGraph, positions: np.ndarray, anchors: np.ndarray | None = None):
    """Noiseless ``(d, r)`` for node positions ``(n, p)``."""
    anchors = graph.anchor_positions if anchors is None else anchors
    e = graph.edges
    d = np.linalg.norm(positions[e[:, 0]] - positions[e[:, 1]], axis=1) if len(e) else np.zeros(0)
    r = np.linalg.norm(positions[graph.pair_node] - anchors[graph.pair_anchor], axis=1)
    return d, r


def sample_ranges(scenario: Scenario, k: int, sigma: float, rng: np.random.Generator) -> MeasurementSet:
    """Draw ``|true range + N(0, sigma^2)|`` for every edge and visible anchor."""
    if not 0 <= k < scenario.K:
        raise StepOutOfRange(f"step {k} outside 0..{scenario.K - 1}")
    if sigma < 0:
        raise InvalidParams("sigma must be nonnegative")
    graph = scenario.graph
    d, r = true_ranges(graph, scenario.truth[k])
    if sigma > 0:
        d = np.abs(d + rng.normal(0.0, sigma, size=d.shape))
        r = np.abs(r + rng.normal(0.0, sigma, size=r.shape))
    return MeasurementSet(step=k, d=d, r=r)


def inject_outliers(
    meas: MeasurementSet,
    prob: float,
    target_anchor: int,
    rng: np.random.Generator,
    graph: NetworkGraph,
    multiplier: float = 2.0,
    nodes: Sequence[int] | None = None,
) -> MeasurementSet:
    """Independently, with probability ``prob``, multiply each node's range to
    ``target_anchor`` by ``multiplier`` and flag it.

    ``nodes`` restricts contamination to the listed nodes (default: every node
    that ranges to the target anchor).
    """
    if not 0.0 <= prob <= 1.0:
        raise BadProbability(f"probability must lie in [0, 1], got {prob}")
    if not 0 <= target_anchor < graph.m:
        raise InvalidParams(f"target anchor {target_anchor} outside 0..{graph.m - 1}")
    mask = graph.pair_anchor == target_anchor
    if nodes is not None:
        mask &= np.isin(graph.pair_node, np.asarray(nodes, dtype=np.intp))
    idx = np.flatnonzero(mask)
    # one uniform per candidate entry regardless of prob keeps streams aligned
    hits = idx[rng.random(idx.size) < prob]
    if hits.size == 0:
        return meas
    r = meas.r.copy()
    flags = meas.outlier_flags.copy()
    r[hits] *= multiplier
    flags[hits] = True
    return replace(meas, r=r, outlier_flags=flags)


def inject_edge_outliers(meas: MeasurementSet, prob: float, rng: np.random.Generator,
                         multiplier: float = 2.0) -> MeasurementSet:
    """Generic hook: contaminate inter-node ranges; unused by the default experiments."""
    if not 0.0 <= prob <= 1.0:
        raise BadProbability(f"probability must lie in [0, 1], got {prob}")
    hits = rng.random(meas.d.size) < prob
    if not hits.any():
        return meas
    d = meas.d.copy()
    d[hits] *= multiplier
    return replace(meas, d=d)


@dataclass(frozen=True)
class OutlierConfig:
    """Outlier model: ``prob`` per step per targeted node, on ``target_anchor``."""

    prob: float = 0.0
    target_anchor: int | None = None
    multiplier: float = 2.0
    nodes: tuple[int, ...] | None = None

    @property
    def enabled(self) -> bool:
        return self.prob > 0.0 and self.target_anchor is not None


def simulate_measurements(
    scenario: Scenario, sigma: float, seed: int, outliers: OutlierConfig | None = None
) -> list[MeasurementSet]:
    """Full measurement stream for one trial."""
    out = []
    for k in range(scenario.K):
        meas = sample_ranges(scenario, k, sigma, step_rng(seed, k, NOISE_STREAM))
        if outliers is not None and outliers.enabled:
            meas = inject_outliers(
                meas, outliers.prob, outliers.target_anchor, step_rng(seed, k, OUTLIER_STREAM),
                scenario.graph, outliers.multiplier, outliers.nodes,
            )
        out.append(meas)
    return out


def write_measurements_csv(path: str | Path, stream: Sequence[MeasurementSet], graph: NetworkGraph) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "kind", "i", "j_or_anchor", "range", "outlier_flag"])
        for meas in stream:
            for (i, j), v in zip(graph.edges, meas.d):
                w.writerow([meas.step, "edge", int(i), int(j), repr(float(v)), 0])
            for i, k, v, f in zip(graph.pair_node, graph.pair_anchor, meas.r, meas.outlier_flags):
                w.writerow([meas.step, "anchor", int(i), int(k), repr(float(v)), int(f)])


def read_measurements_csv(path: str | Path, graph: NetworkGraph) -> list[MeasurementSet]:
    edge_pos = {(int(i), int(j)): e for e, (i, j) in enumerate(graph.edges)}
    pair_pos = {(int(i), int(k)): v for v, (i, k) in enumerate(zip(graph.pair_node, graph.pair_anchor))}
    steps: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            k = int(row["step"])
            if k not in steps:
                steps[k] = (np.full(graph.num_edges, np.nan), np.full(graph.num_pairs, np.nan),
                            np.zeros(graph.num_pairs, dtype=bool))
            d, r, f = steps[k]
            key = (int(row["i"]), int(row["j_or_anchor"]))
            if row["kind"] == "edge":
                d[edge_pos[(min(key), max(key))]] = float(row["range"])
            else:
                r[pair_pos[key]] = float(row["range"])
                f[pair_pos[key]] = bool(int(row["outlier_flag"]))
    return [MeasurementSet(step=k, d=d, r=r, outlier_flags=f) for k, (d, r, f) in sorted(steps.items())]
