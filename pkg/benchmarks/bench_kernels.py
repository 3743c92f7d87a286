"""Compare the compiled and numpy kernel backends.

Times one gradient evaluation and one full per-step solve on the lap
scenario and on larger random networks, and checks that both backends return
bit-identical results.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from locdyn import kernels
from locdyn.measurements import MeasurementSet, simulate_measurements, true_ranges
from locdyn.network import build_network
from locdyn.solver import SolverConfig, _Problem
from locdyn.trajectories import gen_lap


def random_network(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    truth = rng.uniform(0, 100, size=(n, 2))
    anchors = np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 100.0], [0.0, 100.0]])
    edges = [(i, i + 1) for i in range(n - 1)]
    dist = np.linalg.norm(truth[:, None] - truth[None], axis=2)
    edges += [(i, j) for i in range(n) for j in range(i + 2, n) if dist[i, j] < 20]
    vis = [[k for k in range(4) if np.linalg.norm(truth[i] - anchors[k]) < 60] for i in range(n)]
    graph = build_network(n, 2, edges, anchors, vis)
    d, r = true_ranges(graph, truth)
    meas = MeasurementSet(0, np.abs(d + rng.normal(size=d.shape)), np.abs(r + rng.normal(size=r.shape)))
    return f"random n={n} |E|={graph.num_edges}", graph, meas, truth


def lap_case():
    sc = gen_lap()
    return f"lap n={sc.graph.n} |E|={sc.graph.num_edges}", sc.graph, simulate_measurements(sc, 1.0, 0)[40], sc.truth[40]


def bench(case, repeat: int):
    name, graph, meas, truth = case
    pr = _Problem.build(meas, graph)
    args = (pr.edge_i, pr.edge_j, pr.d, pr.pair_node, pr.pair_pos, pr.r)
    c = SolverConfig().constants(graph)
    x0 = truth + 3.0
    rows, outs = [], {}
    for label in kernels.available_backends():
        k = kernels.get_backend(label)
        grad = min(timeit.repeat(lambda: k.gradient(x0, *args, c.lam, truth), number=200, repeat=repeat)) / 200
        solve = lambda: k.nesterov(x0, *args, c.lam, truth, c.step, c.beta, False, 500, 1e-6, None)
        x, iters, _ = solve()
        t = min(timeit.repeat(solve, number=3, repeat=repeat)) / 3
        outs[label] = np.asarray(x).tobytes()
        rows.append((label, grad, t, iters))
    same = len(set(outs.values())) == 1
    print(f"\n{name}  (backends bit-identical: {same})")
    print(f"  {'backend':8s} {'gradient':>12s} {'solve':>12s} {'iters':>6s}")
    base = dict((r[0], r) for r in rows).get("python")
    for label, grad, t, iters in rows:
        speed = f"  x{base[2] / t:.1f}" if base and label != "python" else ""
        print(f"  {label:8s} {grad * 1e6:10.1f}us {t * 1e3:10.2f}ms {iters:6d}{speed}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions (best is reported)")
    args = ap.parse_args()
    print(f"default backend: {kernels.backend.NAME}")
    for case in (lap_case(), random_network(50), random_network(200)):
        bench(case, args.repeat)


if __name__ == "__main__":
    main()
