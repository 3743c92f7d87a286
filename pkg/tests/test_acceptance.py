"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the session summary.
"""

import math
import os

import numpy as np
import pytest

from locdyn.cli import cli_main
from locdyn.convex import compute_constants, fhat_grad, fhat_value, g_grad, g_value
from locdyn.harness import ExperimentConfig, cdf_quantile, run_monte_carlo
from locdyn.measurements import MeasurementSet, simulate_measurements
from locdyn.solver import SolverConfig, distributed_round_trace, solve_step
from locdyn.trajectories import gen_lap
from locdyn.velocity import SMOOTH_FIR_TAPS, TAYLOR6_TAPS, PositionHistory, filter_series, smooth_fir, taylor6

from conftest import ACCEPTANCE_LINES, random_instance
from oracles import fd_gradient

JOBS = os.cpu_count() or 1
EPS = np.finfo(float).eps


def report(num, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail}"
    ACCEPTANCE_LINES[num] = line
    print(line)
    assert ok, line


def monte_carlo(scenario, algorithms, outlier_prob=0.0):
    cfg = ExperimentConfig(scenario=scenario, algorithms=algorithms, trials=100, seed=0, sigma=1.0,
                           outlier_prob=outlier_prob, jobs=JOBS)
    return run_monte_carlo(cfg)


def test_1_spiral_accuracy_gain():
    s = monte_carlo("spiral", ("locdyn", "static"))
    gain = s.mean("static") - s.mean("locdyn")
    report(1, "spiral accuracy gain", gain >= 0.15,
           f"static {s.mean('static'):.3f} m - locdyn {s.mean('locdyn'):.3f} m = {gain:.3f} m (need >= 0.15)")


def test_2_lap_cdf_ordering():
    s = monte_carlo("lap", ("locdyn", "static", "kalman"))
    qs = [q / 10 for q in range(1, 10)]
    loc = [cdf_quantile(s.cdf("locdyn"), q) for q in qs]
    sta = [cdf_quantile(s.cdf("static"), q) for q in qs]
    ok = all(a < b for a, b in zip(loc, sta))
    worst = max(a - b for a, b in zip(loc, sta))
    report(2, "lap CDF ordering", ok,
           f"locdyn left of static at all 9 deciles (worst gap {worst:+.3f} m); means locdyn {s.mean('locdyn'):.3f}, "
           f"static {s.mean('static'):.3f}, kalman {s.mean('kalman'):.3f} (kalman not gated)")


def test_3_outlier_robustness():
    s = monte_carlo("lawnmower", ("locdyn", "static"), outlier_prob=0.01)
    ok = s.mean("locdyn") < s.mean("static") and s.var("locdyn") < s.var("static")
    report(3, "lawn mower outlier robustness", ok,
           f"mean {s.mean('locdyn'):.3f} vs {s.mean('static'):.3f} m, "
           f"var {s.var('locdyn'):.5f} vs {s.var('static'):.5f}")


def test_4_convergence_bound():
    rng = np.random.default_rng(4)
    worst = -math.inf
    for _ in range(20):
        graph, meas, truth = random_instance(rng, n=int(rng.integers(2, 7)), p=int(rng.integers(2, 4)))
        lam = float(rng.uniform(0.05, 2.0))
        xt = truth + rng.normal(size=truth.shape)
        x0 = rng.normal(scale=10, size=truth.shape)
        c = compute_constants(graph, lam)
        ref = solve_step(meas, xt, SolverConfig(lam=lam, max_iters=100_000, grad_tol=0.0), graph, x_init=x0)
        g_star = g_value(ref.x, xt, lam, meas, graph)
        run = solve_step(meas, xt, SolverConfig(lam=lam, max_iters=500, grad_tol=0.0, record=True), graph, x_init=x0)
        k = np.arange(run.objective.size)
        init_gap = run.objective[0] - g_star + c.m / 2 * np.sum((x0 - ref.x) ** 2)
        bound = 4.0 / (2.0 + k * math.sqrt(c.m / c.L)) ** 2 * init_gap
        worst = max(worst, float(np.max(run.objective - g_star - bound)))
    report(4, "accelerated convergence bound", worst <= 1e-9,
           f"max over 20 instances and 500 iterations of (gap - bound) = {worst:.3e} (need <= 1e-9)")


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_5_gradient_finite_differences():
    rng = np.random.default_rng(5)
    worst, worst_b, points = 0.0, 0.0, 0
    while points < 1000:
        graph, meas, truth = random_instance(rng, n=int(rng.integers(1, 6)), p=int(rng.integers(2, 4)))
        if not (graph.num_edges or graph.num_pairs):
            continue
        points += 1
        x = rng.normal(scale=15, size=truth.shape)
        xt = rng.normal(scale=15, size=truth.shape)
        lam = float(rng.uniform(0.01, 2.0))
        g = fhat_grad(x, meas, graph)
        if np.linalg.norm(g) > 0:
            worst = max(worst, _rel(fd_gradient(lambda z: fhat_value(z, meas, graph), x, 1e-5), g))
        worst = max(worst, _rel(fd_gradient(lambda z: g_value(z, xt, lam, meas, graph), x, 1e-5),
                                g_grad(x, xt, lam, meas, graph)))
        # put about half of the terms within 1e-6 of their ball boundary
        e = graph.edges
        d_on = np.linalg.norm(x[e[:, 0]] - x[e[:, 1]], axis=1) if len(e) else np.zeros(0)
        r_on = np.linalg.norm(x[graph.pair_node] - meas.pair_positions(graph), axis=1)
        d_on = np.abs(d_on + rng.uniform(-1e-6, 1e-6, d_on.shape))
        r_on = np.abs(r_on + rng.uniform(-1e-6, 1e-6, r_on.shape))
        mb = MeasurementSet(0, np.where(rng.random(d_on.shape) < 0.5, d_on, meas.d),
                            np.where(rng.random(r_on.shape) < 0.5, r_on, meas.r))
        gb = fhat_grad(x, mb, graph)
        if np.linalg.norm(gb) > 1e-3:
            worst_b = max(worst_b, _rel(fd_gradient(lambda z: fhat_value(z, mb, graph), x, 1e-6), gb))
        worst_b = max(worst_b, _rel(fd_gradient(lambda z: g_value(z, xt, lam, mb, graph), x, 1e-6),
                                    g_grad(x, xt, lam, mb, graph)))
    report(5, "gradient vs finite differences", worst < 1e-6 and worst_b < 1e-4,
           f"1000 points: max rel err {worst:.2e} (need < 1e-6), near boundaries {worst_b:.2e} (need < 1e-4)")


def test_6_smoothness_and_strong_convexity():
    # slack: a floating-point error bound on the two evaluated gradients, about 1e-13 relative
    rng = np.random.default_rng(6)
    viol_L = viol_m = 0
    for _ in range(1000):
        graph, meas, truth = random_instance(rng, n=int(rng.integers(1, 6)), p=int(rng.integers(2, 4)))
        lam = float(10 ** rng.uniform(-3, 1))
        c = compute_constants(graph, lam)
        xt = rng.normal(scale=10, size=truth.shape)
        x = rng.normal(scale=15, size=truth.shape)
        y = x + rng.normal(scale=10 ** rng.uniform(-6, 1.5), size=x.shape)
        gx, gy = g_grad(x, xt, lam, meas, graph), g_grad(y, xt, lam, meas, graph)
        dg, dx = gx - gy, x - y
        nd = float(np.linalg.norm(dx))
        slack = 8 * EPS * (np.linalg.norm(gx) + np.linalg.norm(gy) + c.L * (np.linalg.norm(x) + np.linalg.norm(xt)))
        viol_L += np.linalg.norm(dg) > c.L * nd + slack
        viol_m += float(np.sum(dg * dx)) < c.m * nd * nd - slack * nd
    report(6, "smoothness L and strong convexity m", viol_L == 0 and viol_m == 0,
           f"1000 pairs: {viol_L} L-violations, {viol_m} m-violations (need 0)")


def test_7_distributed_equivalence():
    rng = np.random.default_rng(7)
    cases = []
    for _ in range(10):
        graph, meas, truth = random_instance(rng, n=int(rng.integers(2, 8)), p=int(rng.integers(2, 4)))
        cases.append((graph, meas, truth + rng.normal(size=truth.shape), rng.normal(scale=8, size=truth.shape)))
    sc = gen_lap()
    stream = simulate_measurements(sc, 1.0, 7)
    for k in (0, 50, 100):
        cases.append((sc.graph, stream[k], sc.truth[k], sc.truth[k] + 2.0))
    bitwise = counts = clean = True
    iters = 0
    for graph, meas, xt, x0 in cases:
        cfg = SolverConfig(lam=0.5, record=True)
        a = solve_step(meas, xt, cfg, graph, x_init=x0)
        b = distributed_round_trace(meas, xt, cfg, graph, x_init=x0)
        bitwise &= a.iterations == b.iterations and a.iterates.tobytes() == b.iterates.tobytes()
        counts &= all(m == 2 * graph.num_edges for m in b.messages_per_iter)
        clean &= not b.violations
        iters += b.iterations
    report(7, "distributed equivalence", bitwise and counts and clean,
           f"{len(cases)} problems, {iters} iterations: bitwise={bitwise}, 2|E| messages={counts}, "
           f"no non-neighbor reads={clean}")


def test_8_differentiators():
    errs = []
    for fn in (taylor6, smooth_fir):
        for coeffs in [(3.5, 0.0, 0.0), (-1.0, 0.7, 0.0), (2.0, -1.3, 0.45)]:
            c0, c1, c2 = coeffs
            h = PositionHistory.from_sequence([np.array([c0 + c1 * t + c2 * t * t]) for t in range(40)])
            for k in range(7, 41):
                exact = c1 + 2 * c2 * (k - 4)
                errs.append(abs(float(fn(h, k)[0]) - exact))
    exact_ok = max(errs) <= 1e-10
    const = PositionHistory.from_sequence([np.array([2.5, -1.0])] * 10)
    zero_ok = np.all(taylor6(const, 9) == 0) and np.all(smooth_fir(const, 9) == 0)
    noise = np.random.default_rng(8).normal(size=10_000)
    vs, vt = filter_series(noise, SMOOTH_FIR_TAPS).var(), filter_series(noise, TAYLOR6_TAPS).var()
    ratio, expected = vs / vt, (84 / 1024) / (4214 / 3600)
    ratio_ok = vs < vt and abs(ratio / expected - 1) < 0.10
    report(8, "differentiator exactness and noise gain", exact_ok and zero_ok and ratio_ok,
           f"max poly error {max(errs):.1e}, zero on constants={bool(zero_ok)}, "
           f"variance ratio {ratio:.4f} vs {expected:.4f}")


def test_9_reproducible_benchmarks(tmp_path, capsys):
    args = ["benchmark", "--scenario", "lawnmower", "--trials", "4", "--seed", "11", "--outlier-prob", "0.05"]
    snapshots = []
    for name in ("a", "b"):
        assert cli_main(args + ["--out", str(tmp_path / name)]) == 0
        snapshots.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())
                          if p.name != "timing.json"})
    capsys.readouterr()
    same = snapshots[0] == snapshots[1]
    report(9, "byte-identical reruns", same and "summary.csv" in snapshots[0],
           f"{len(snapshots[0])} result files compared ({', '.join(snapshots[0])})")
