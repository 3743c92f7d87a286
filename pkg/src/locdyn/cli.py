"""Range-only localization of moving sensor networks: scenarios, solver runs and Monte-Carlo benchmarks.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import LocDynError
from .harness import (
    ExperimentConfig,
    empirical_cdf,
    read_errors_csv,
    run_monte_carlo,
    run_sweep,
    run_trial,
    write_cdf_csv,
    write_estimates_csv,
)
from .measurements import OutlierConfig, simulate_measurements, write_measurements_csv
from .solver import SolverConfig, run_trajectory
from .trajectories import load_scenario, make_scenario, save_scenario

SCENARIOS = ("lap", "spiral", "lawnmower")


def _kv(items):
    """Parse ``key=value`` scenario overrides; values are JSON when possible."""
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def _add_experiment_args(p: argparse.ArgumentParser, trials_default: int | None = 100,
                         single_lambda: bool = True) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override its keys")
    p.add_argument("--scenario", choices=SCENARIOS, help="scenario kind (default lap)")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="scenario parameter override, repeatable")
    p.add_argument("--sigma", type=float, help="range noise standard deviation in meters (default 1.0)")
    if single_lambda:
        p.add_argument("--lambda", dest="lam", type=float, help="regularization weight (default 0.5)")
    p.add_argument("--trials", type=int, help=f"Monte-Carlo trials (default {trials_default})")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--algorithms", nargs="+", choices=("locdyn", "static", "kalman"), help="algorithms to run")
    p.add_argument("--outlier-prob", type=float, help="per-step probability of doubling the target anchor range")
    p.add_argument("--outlier-anchor", type=int, help="target anchor index (default: scenario's SW anchor)")
    p.add_argument("--max-iters", type=int, help="iteration cap per step (default 500)")
    p.add_argument("--grad-tol", type=float, help="RMS gradient stopping tolerance (default 1e-6)")
    p.add_argument("--velocity", choices=("smooth_fir", "taylor6", "central"), help="velocity estimator")
    p.add_argument("--metric", choices=("stacked", "per_node"), help="trajectory error metric (default stacked)")
    p.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--no-estimates", action="store_true", help="skip writing estimates.csv")


def _experiment_config(args) -> ExperimentConfig:
    base = {}
    if args.config:
        base = json.loads(args.config.read_text(encoding="utf-8"))
    cfg = ExperimentConfig.from_dict(base)
    overrides = {
        "scenario": args.scenario, "sigma": args.sigma, "lam": getattr(args, "lam", None), "trials": args.trials,
        "seed": args.seed,
        "outlier_prob": args.outlier_prob, "outlier_anchor": args.outlier_anchor, "max_iters": args.max_iters,
        "grad_tol": args.grad_tol, "velocity_method": args.velocity, "metric": args.metric, "jobs": args.jobs,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.algorithms:
        overrides["algorithms"] = tuple(args.algorithms)
    if args.param:
        overrides["scenario_params"] = {**cfg.scenario_params, **_kv(args.param)}
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.no_estimates:
        overrides["write_estimates"] = False
    cfg = replace(cfg, **overrides)
    if "algorithms" not in overrides and "algorithms" not in base and cfg.scenario == "spiral":
        cfg = replace(cfg, algorithms=("locdyn", "static"))
    return cfg


def _print_stats(summary) -> None:
    for algo in summary.algorithms:
        print(f"{algo:8s} mean={summary.mean(algo):.4f} m  var={summary.var(algo):.6f}")


def cmd_scenario(args) -> int:
    sc = make_scenario(args.kind, **_kv(args.param))
    out = save_scenario(sc, args.out)
    print(f"wrote {args.kind} scenario (K={sc.K}, n={sc.graph.n}, anchors={sc.graph.m}) to {out}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _experiment_config(args)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir=f"results/{cfg.scenario}")
    summary = run_monte_carlo(cfg)
    _print_stats(summary)
    print(f"results in {cfg.output_dir}")
    return 0


def cmd_simulate(args) -> int:
    cfg = replace(_experiment_config(args), trials=1)
    sc = cfg.build_scenario()
    out = Path(cfg.output_dir or f"results/{cfg.scenario}_run")
    out.mkdir(parents=True, exist_ok=True)
    tr = run_trial(sc, cfg, 0)
    stream = simulate_measurements(sc, cfg.sigma, tr.seed, cfg.outliers(sc))
    write_measurements_csv(out / "measurements.csv", stream, sc.graph)
    write_estimates_csv(out / "estimates.csv", [tr], sc.graph.p)
    save_scenario(sc, out / "scenario")
    for algo, e in tr.errors.items():
        print(f"{algo:8s} error={e:.4f} m")
    print(f"logs in {out}")
    return 0


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    outliers = None
    if args.outlier_prob:
        anchor = args.outlier_anchor if args.outlier_anchor is not None else sc.outlier_anchor
        outliers = OutlierConfig(args.outlier_prob, anchor)
    cfg = SolverConfig(lam=args.lam, max_iters=args.max_iters, grad_tol=args.grad_tol)
    est = run_trajectory(sc, args.sigma, outliers, cfg, args.seed)
    out = args.out or Path(args.scenario) / "locdyn_estimates.csv"
    cols = ["x", "y", "z"][: sc.graph.p]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "step", "node", *cols, "iterations", "grad_norm"])
        for k in range(sc.K):
            for i in range(sc.graph.n):
                w.writerow([0, k, i, *(repr(float(v)) for v in est.x_hat[k, i]), int(est.iterations[k]),
                            repr(float(est.grad_norm[k]))])
    err = np.mean(np.linalg.norm((est.x_hat - sc.truth).reshape(sc.K, -1), axis=1))
    print(f"locdyn error={err:.4f} m, mean iterations={est.iterations.mean():.1f}; wrote {out}")
    return 0


def cmd_cdf(args) -> int:
    errors = read_errors_csv(args.results)
    for algo, vals in errors.items():
        cdf = empirical_cdf(vals)
        print(f"# {algo} (n={len(vals)}, mean={np.mean(vals):.4f})")
        print("value,fraction")
        for v, f in cdf:
            print(f"{v:.6f},{f:.4f}")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            write_cdf_csv(args.out / f"cdf_{algo}.csv", cdf)
    return 0


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    rows = run_sweep(cfg, args.lambdas)
    out = Path(cfg.output_dir or f"results/{cfg.scenario}_sweep")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["algorithm", "lambda", "mean", "var"], lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
            lam = row["lambda"] if row["lambda"] != "" else "-"
            print(f"{row['algorithm']:8s} lambda={lam}  mean={row['mean']:.4f}  var={row['var']:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="locdyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", help="scenario generation")
    sc_sub = sc.add_subparsers(dest="action", required=True)
    gen = sc_sub.add_parser("gen", help="generate a scenario and write truth.csv + scenario.json")
    gen.add_argument("--kind", choices=SCENARIOS, required=True, help="trajectory family")
    gen.add_argument("--out", type=Path, required=True, help="output directory")
    gen.add_argument("--param", action="append", metavar="KEY=VALUE", help="parameter override, repeatable")
    gen.set_defaults(func=cmd_scenario)

    sim = sub.add_parser("simulate", help="one trial with measurement and estimate logs")
    _add_experiment_args(sim, trials_default=None)
    sim.set_defaults(func=cmd_simulate)

    bench = sub.add_parser("benchmark", help="Monte-Carlo comparison of the algorithms")
    _add_experiment_args(bench)
    bench.set_defaults(func=cmd_benchmark)

    solve = sub.add_parser("solve", help="run LocDyn on a saved scenario directory")
    solve.add_argument("--scenario", type=Path, required=True, help="directory written by 'scenario gen'")
    solve.add_argument("--lambda", dest="lam", type=float, default=0.5, help="regularization weight")
    solve.add_argument("--sigma", type=float, default=1.0, help="range noise standard deviation (m)")
    solve.add_argument("--seed", type=int, default=0, help="random seed")
    solve.add_argument("--outlier-prob", type=float, default=0.0, help="outlier probability")
    solve.add_argument("--outlier-anchor", type=int, help="outlier target anchor")
    solve.add_argument("--max-iters", type=int, default=500, help="iteration cap per step")
    solve.add_argument("--grad-tol", type=float, default=1e-6, help="RMS gradient tolerance")
    solve.add_argument("--out", type=Path, help="estimate CSV path")
    solve.set_defaults(func=cmd_solve)

    cdf = sub.add_parser("cdf", help="empirical CDFs from summary.csv or estimates.csv")
    cdf.add_argument("results", type=Path, help="summary.csv or estimates.csv")
    cdf.add_argument("--out", type=Path, help="directory for cdf_<algo>.csv files")
    cdf.set_defaults(func=cmd_cdf)

    sweep = sub.add_parser("sweep", help="LocDyn accuracy over a list of lambdas")
    _add_experiment_args(sweep, trials_default=100, single_lambda=False)
    sweep.add_argument("--lambda", dest="lambdas", type=float, nargs="+", required=True, metavar="LAMBDA",
                       help="lambda values to evaluate")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        return args.func(args)
    except (LocDynError, OSError, ValueError, KeyError) as exc:
        print(f"locdyn: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
