"""Measurement/communication graph, anchors and incidence structure.

Node and anchor indices are 0-based throughout the package.  Edges are stored
as ``(i, j)`` rows with ``i < j``; the neighbor list of every node follows the
order of its incident edges in the edge list, which fixes the order in which
per-edge gradient contributions are accumulated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import BadDimension, DisconnectedGraph, DuplicateSelfLoop, InvalidParams


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Validated, immutable network description.

    Attributes:
        n: number of mobile nodes.
        p: embedding dimension (2 or 3).
        edges: ``(E, 2)`` int array, each row ``(i, j)`` with ``i < j``.
        anchor_positions: ``(m, p)`` float array.
        anchor_visibility: for each node, the tuple of anchor indices it ranges to.
        neighbors: for each node, neighbor ids in incident-edge order.
        neighbor_edges: edge index matching each entry of ``neighbors``.
        degree: ``(n,)`` int array of node degrees.
        pair_node, pair_anchor: flattened node-anchor visibility pairs, ordered
            by node and then by the node's visibility list.
    """

    n: int
    p: int
    edges: np.ndarray
    anchor_positions: np.ndarray
    anchor_visibility: tuple[tuple[int, ...], ...]
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    neighbor_edges: tuple[tuple[int, ...], ...] = field(repr=False)
    degree: np.ndarray = field(repr=False)
    pair_node: np.ndarray = field(repr=False)
    pair_anchor: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return int(self.anchor_positions.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_pairs(self) -> int:
        return int(self.pair_node.shape[0])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "edges": self.edges.tolist(),
            "anchors": self.anchor_positions.tolist(),
            "visibility": [list(v) for v in self.anchor_visibility],
        }


@dataclass(frozen=True, eq=False)
class IncidenceStructure:
    """Arc-node incidence matrix ``C`` (E x n) and Laplacian ``C^T C`` (n x n)."""

    incidence: np.ndarray
    laplacian: np.ndarray

    def lifted(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``C kron I_p`` and ``L kron I_p``."""
        eye = np.eye(p, dtype=np.int64)
        return np.kron(self.incidence, eye), np.kron(self.laplacian, eye)


@dataclass(frozen=True)
class LocalizabilityReport:
    ok: bool
    message: str
    warnings: tuple[str, ...] = ()


def _is_connected(n: int, edges: np.ndarray) -> bool:
    if n <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def build_network(
    n: int,
    p: int,
    edges: Iterable[Sequence[int]],
    anchor_positions,
    anchor_visibility: Sequence[Sequence[int]] | None = None,
) -> NetworkGraph:
    """Validate inputs and build a :class:`NetworkGraph`.

    ``anchor_visibility=None`` means every node ranges to every anchor.
    Duplicate edges (in either orientation) are dropped, keeping the first
    occurrence.
    """
    if p not in (2, 3):
        raise BadDimension(f"p must be 2 or 3, got {p}")
    if n < 1:
        raise InvalidParams(f"need at least one node, got n={n}")

    anchors = np.array(anchor_positions, dtype=float).reshape(-1, p) if len(anchor_positions) else np.zeros((0, p))
    if anchors.ndim != 2 or anchors.shape[1] != p:
        raise BadDimension(f"anchor positions must have shape (m, {p})")
    m = anchors.shape[0]

    seen: set[tuple[int, int]] = set()
    rows: list[tuple[int, int]] = []
    for e in edges:
        a, b = (int(v) for v in e)
        if a == b:
            raise DuplicateSelfLoop(f"self-loop on node {a}")
        if not (0 <= a < n and 0 <= b < n):
            raise InvalidParams(f"edge ({a}, {b}) references a node outside 0..{n - 1}")
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        rows.append(key)
    edge_arr = np.array(rows, dtype=np.intp).reshape(-1, 2)

    if not _is_connected(n, edge_arr):
        raise DisconnectedGraph("the node graph is not connected")

    if anchor_visibility is None:
        vis = tuple(tuple(range(m)) for _ in range(n))
    else:
        if len(anchor_visibility) != n:
            raise InvalidParams("anchor_visibility needs one entry per node")
        vis_list = []
        for i, ks in enumerate(anchor_visibility):
            ks = tuple(int(k) for k in ks)
            if any(not 0 <= k < m for k in ks):
                raise InvalidParams(f"node {i} sees an anchor index outside 0..{m - 1}")
            if len(set(ks)) != len(ks):
                raise InvalidParams(f"node {i} lists an anchor twice")
            vis_list.append(ks)
        vis = tuple(vis_list)

    nbrs: list[list[int]] = [[] for _ in range(n)]
    nbr_edges: list[list[int]] = [[] for _ in range(n)]
    for e, (i, j) in enumerate(edge_arr):
        nbrs[i].append(int(j))
        nbr_edges[i].append(e)
        nbrs[j].append(int(i))
        nbr_edges[j].append(e)
    degree = np.array([len(v) for v in nbrs], dtype=np.intp)

    pair_node = np.array([i for i in range(n) for _ in vis[i]], dtype=np.intp)
    pair_anchor = np.array([k for i in range(n) for k in vis[i]], dtype=np.intp)

    return NetworkGraph(
        n=n,
        p=p,
        edges=_frozen(edge_arr),
        anchor_positions=_frozen(anchors),
        anchor_visibility=vis,
        neighbors=tuple(tuple(v) for v in nbrs),
        neighbor_edges=tuple(tuple(v) for v in nbr_edges),
        degree=_frozen(degree),
        pair_node=_frozen(pair_node),
        pair_anchor=_frozen(pair_anchor),
    )


def incidence_and_laplacian(graph: NetworkGraph) -> IncidenceStructure:
    """Incidence with +1 at the smaller endpoint and -1 at the larger one."""
    E = graph.num_edges
    C = np.zeros((E, graph.n), dtype=np.int64)
    rows = np.arange(E)
    C[rows, graph.edges[:, 0]] = 1
    C[rows, graph.edges[:, 1]] = -1
    return IncidenceStructure(incidence=_frozen(C), laplacian=_frozen(C.T @ C))


def laplacian_max_eigenvalue(graph: NetworkGraph) -> float:
    if graph.num_edges == 0:
        return 0.0
    lap = incidence_and_laplacian(graph).laplacian.astype(float)
    return float(np.linalg.eigvalsh(lap)[-1])


def check_localizability(graph: NetworkGraph) -> LocalizabilityReport:
    """Anchor-count check: range-only localization needs at least p + 1 anchors."""
    need = graph.p + 1
    warnings = tuple(
        f"node {i} ranges to no anchor; it must be localized through its neighbors"
        for i, vis in enumerate(graph.anchor_visibility)
        if not vis
    )
    if graph.m < need:
        return LocalizabilityReport(
            False, f"{graph.m} anchors for p={graph.p}; at least {need} are required", warnings
        )
    return LocalizabilityReport(True, f"{graph.m} anchors >= {need}", warnings)


def network_from_dict(cfg: dict) -> NetworkGraph:
    """Build a graph from the config schema documented in the README.

    Keys: ``n``, ``p``, ``edges`` (list of pairs), ``anchors`` (list of points),
    optional ``visibility`` (list of anchor-index lists, one per node) and
    optional ``complete: true`` to connect every node pair.
    """
    n, p = int(cfg["n"]), int(cfg["p"])
    if cfg.get("complete"):
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        edges = cfg.get("edges", [])
    return build_network(n, p, edges, cfg.get("anchors", []), cfg.get("visibility"))


def load_network(path: str | Path) -> NetworkGraph:
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def save_network(graph: NetworkGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=2) + "\n", encoding="utf-8")
