"""Monte-Carlo experiments, error metrics, empirical CDFs and result files."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, kernels
from .baselines import run_kalman, run_static
from .errors import EmptyInput, InvalidParams, LengthMismatch
from .measurements import OutlierConfig, simulate_measurements
from .solver import EstimateHistory, SolverConfig, run_trajectory
from .trajectories import Scenario, make_scenario

ALGORITHMS = ("locdyn", "static", "kalman")


def node_errors(x_hat: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """``(K, n)`` Euclidean error of every node at every step."""
    x_hat, truth = np.asarray(x_hat, dtype=float), np.asarray(truth, dtype=float)
    if x_hat.shape != truth.shape:
        raise LengthMismatch(f"estimates {x_hat.shape} vs truth {truth.shape}")
    return np.sqrt(np.sum((x_hat - truth) ** 2, axis=-1))


def errors_to_metric(errs: np.ndarray, metric: str = "stacked") -> float:
    """Collapse ``(K, n)`` node errors into one trajectory error.

    ``stacked``: mean over steps of the norm of the stacked team error.
    ``per_node``: mean over steps and nodes of the individual errors.
    """
    errs = np.asarray(errs, dtype=float)
    if errs.size == 0:
        raise EmptyInput("no errors")
    if metric == "stacked":
        return float(np.mean(np.sqrt(np.sum(errs * errs, axis=1))))
    if metric == "per_node":
        return float(np.mean(errs))
    raise InvalidParams(f"unknown metric {metric!r}")


def trajectory_error(est, truth, metric: str = "stacked") -> float:
    x_hat = est.x_hat if isinstance(est, EstimateHistory) else est
    return errors_to_metric(node_errors(x_hat, truth), metric)


def empirical_cdf(errors: Sequence[float]) -> list[tuple[float, float]]:
    """Sorted distinct values with the fraction of samples at or below each."""
    vals = np.sort(np.asarray(errors, dtype=float).ravel())
    if vals.size == 0:
        raise EmptyInput("empirical CDF of an empty sample")
    uniq, counts = np.unique(vals, return_counts=True)
    frac = np.cumsum(counts) / vals.size
    return [(float(v), float(f)) for v, f in zip(uniq, frac)]


def cdf_quantile(cdf: list[tuple[float, float]], q: float) -> float:
    """Smallest value whose CDF reaches ``q``."""
    for v, f in cdf:
        if f >= q - 1e-12:
            return v
    return cdf[-1][0]


def trial_seed(base_seed: int, trial: int) -> int:
    """Stable 63-bit seed: BLAKE2b-64 of ``"<base_seed>:<trial>"``."""
    h = hashlib.blake2b(f"{int(base_seed)}:{int(trial)}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "big") & (2 ** 63 - 1)


@dataclass
class ExperimentConfig:
    """One Monte-Carlo experiment.  Serialized verbatim into ``run.json``."""

    scenario: str = "lap"
    scenario_params: dict = field(default_factory=dict)
    sigma: float = 1.0
    outlier_prob: float = 0.0
    outlier_anchor: int | None = None  # None: the scenario's designated anchor
    outlier_multiplier: float = 2.0
    algorithms: tuple[str, ...] = ALGORITHMS
    trials: int = 100
    seed: int = 0
    lam: float = 0.5
    max_iters: int = 500
    grad_tol: float = 1e-6
    velocity_method: str = "smooth_fir"
    init_policy: str = "warm_start"
    kalman_accel_psd: float = 0.05
    metric: str = "stacked"
    output_dir: str | None = None
    jobs: int = 1
    write_estimates: bool = True

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        if self.trials < 1:
            raise InvalidParams("trials must be >= 1")
        if not self.algorithms:
            raise InvalidParams("at least one algorithm is required")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise InvalidParams(f"unknown algorithms {sorted(bad)}")

    @classmethod
    def from_dict(cls, cfg: dict) -> ExperimentConfig:
        cfg = dict(cfg)
        out = cfg.pop("outliers", None)
        if out:
            cfg.setdefault("outlier_prob", out.get("prob", 0.0))
            cfg.setdefault("outlier_anchor", out.get("anchor"))
            cfg.setdefault("outlier_multiplier", out.get("multiplier", 2.0))
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
        unknown = set(cfg) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidParams(f"unknown config keys {sorted(unknown)}")
        return cls(**cfg)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(lam=self.lam, max_iters=self.max_iters, grad_tol=self.grad_tol,
                            velocity_method=self.velocity_method, init_policy=self.init_policy)

    def outliers(self, scenario: Scenario) -> OutlierConfig | None:
        if self.outlier_prob <= 0:
            return None
        anchor = self.outlier_anchor if self.outlier_anchor is not None else scenario.outlier_anchor
        if anchor is None:
            raise InvalidParams("outliers requested but no target anchor is known")
        return OutlierConfig(self.outlier_prob, int(anchor), self.outlier_multiplier)

    def build_scenario(self) -> Scenario:
        return make_scenario(self.scenario, **self.scenario_params)


@dataclass
class TrialResult:
    trial: int
    seed: int
    estimates: dict[str, EstimateHistory]
    node_errors: dict[str, np.ndarray]
    errors: dict[str, float]


@dataclass
class ResultSummary:
    algorithms: tuple[str, ...]
    errors: dict[str, np.ndarray]  # one per trial
    seeds: list[int]
    metadata: dict = field(default_factory=dict)
    trials: list[TrialResult] | None = None

    def mean(self, algo: str) -> float:
        return float(np.mean(self.errors[algo]))

    def var(self, algo: str) -> float:
        return float(np.var(self.errors[algo]))

    def cdf(self, algo: str) -> list[tuple[float, float]]:
        return empirical_cdf(self.errors[algo])


def run_trial(scenario: Scenario, config: ExperimentConfig, trial: int) -> TrialResult:
    """All algorithms on one shared measurement stream."""
    seed = trial_seed(config.seed, trial)
    stream = simulate_measurements(scenario, config.sigma, seed, config.outliers(scenario))
    est: dict[str, EstimateHistory] = {}
    for algo in config.algorithms:
        if algo == "locdyn":
            est[algo] = run_trajectory(scenario, config.sigma, None, config.solver_config(), seed, measurements=stream)
        elif algo == "static":
            est[algo] = run_static(scenario, stream, config.solver_config())
        else:
            est[algo] = run_kalman(scenario, stream, config.sigma, config.kalman_accel_psd)
    nerr = {a: node_errors(h.x_hat, scenario.truth) for a, h in est.items()}
    errs = {a: errors_to_metric(e, config.metric) for a, e in nerr.items()}
    return TrialResult(trial, seed, est, nerr, errs)


def _trial_worker(args):
    scenario, config, trial = args
    return run_trial(scenario, config, trial)


def run_monte_carlo(config: ExperimentConfig, scenario: Scenario | None = None,
                    keep_trials: bool = False) -> ResultSummary:
    scenario = scenario or config.build_scenario()
    t0 = time.perf_counter()
    jobs = [(scenario, config, t) for t in range(config.trials)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            results = list(ex.map(_trial_worker, jobs))
    else:
        results = [_trial_worker(j) for j in jobs]
    runtime = time.perf_counter() - t0
    errors = {a: np.array([r.errors[a] for r in results]) for a in config.algorithms}
    summary = ResultSummary(
        algorithms=config.algorithms,
        errors=errors,
        seeds=[r.seed for r in results],
        metadata={"config": asdict(config), "runtime_s": runtime, **run_environment()},
        trials=results if (keep_trials or config.output_dir) else None,
    )
    if config.output_dir:
        write_results(summary, scenario, config)
    if not keep_trials:
        summary.trials = None
    return summary


def run_environment() -> dict:
    return {
        "locdyn_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "kernel_backend": kernels.backend.NAME,
    }


# --------------------------------------------------------------------------
# files


def _fmt(v: float) -> str:
    return repr(float(v))


def write_summary_csv(path, summary: ResultSummary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "trial", "error"])
        for algo in summary.algorithms:
            for t, e in enumerate(summary.errors[algo]):
                w.writerow([algo, t, _fmt(e)])


def write_cdf_csv(path, cdf: list[tuple[float, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "fraction"])
        for v, f in cdf:
            w.writerow([_fmt(v), _fmt(f)])


def write_estimates_csv(path, trials: list[TrialResult], p: int) -> None:
    cols = ["x", "y", "z"][:p]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "algorithm", "step", "node", *cols, "error", "iterations", "grad_norm"])
        for tr in trials:
            for algo, est in tr.estimates.items():
                err = tr.node_errors[algo]
                K, n, _ = est.x_hat.shape
                for k in range(K):
                    it = "" if est.iterations is None else int(est.iterations[k])
                    gn = "" if est.grad_norm is None else _fmt(est.grad_norm[k])
                    for i in range(n):
                        w.writerow([tr.trial, algo, k, i, *(_fmt(v) for v in est.x_hat[k, i]),
                                    _fmt(err[k, i]), it, gn])


def write_results(summary: ResultSummary, scenario: Scenario, config: ExperimentConfig) -> Path:
    """Write summary, per-algorithm CDFs, estimates and run metadata.

    Everything except ``timing.json`` is a pure function of the config.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(out / "summary.csv", summary)
    for algo in summary.algorithms:
        write_cdf_csv(out / f"cdf_{algo}.csv", summary.cdf(algo))
    if config.write_estimates and summary.trials is not None:
        write_estimates_csv(out / "estimates.csv", summary.trials, scenario.graph.p)
    meta = {
        "config": asdict(config) | {"output_dir": None, "jobs": None},
        "seeds": summary.seeds,
        "scenario": {"name": scenario.name, "K": scenario.K, "dt": scenario.dt, "n": scenario.graph.n,
                     "p": scenario.graph.p, "anchors": scenario.graph.m, "meta": scenario.meta},
        "stats": {a: {"mean": summary.mean(a), "var": summary.var(a)} for a in summary.algorithms},
        **run_environment(),
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "timing.json").write_text(json.dumps({"runtime_s": summary.metadata["runtime_s"]}) + "\n",
                                     encoding="utf-8")
    return out


def read_errors_csv(path) -> dict[str, np.ndarray]:
    """Per-trial errors from ``summary.csv``, or recomputed from ``estimates.csv``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        rows = list(reader)
    if "node" in fields:
        return summary_from_estimates(rows)
    if not {"algorithm", "error"} <= set(fields):
        raise InvalidParams(f"{path}: expected summary.csv or estimates.csv columns")
    out: dict[str, list[float]] = {}
    for row in rows:
        out.setdefault(row["algorithm"], []).append(float(row["error"]))
    return {a: np.array(v) for a, v in out.items()}


def summary_from_estimates(rows, metric: str = "stacked") -> dict[str, np.ndarray]:
    """Rebuild per-trial errors from persisted per-node step errors."""
    grouped: dict[str, dict[int, dict[int, dict[int, float]]]] = {}
    for row in rows:
        a, t, k, i = row["algorithm"], int(row["trial"]), int(row["step"]), int(row["node"])
        grouped.setdefault(a, {}).setdefault(t, {}).setdefault(k, {})[i] = float(row["error"])
    out = {}
    for a, trials in grouped.items():
        vals = []
        for t in sorted(trials):
            steps = trials[t]
            errs = np.array([[steps[k][i] for i in sorted(steps[k])] for k in sorted(steps)])
            vals.append(errors_to_metric(errs, metric))
        out[a] = np.array(vals)
    return out


def run_sweep(config: ExperimentConfig, lambdas: Sequence[float]) -> list[dict]:
    """LocDyn mean/variance per lambda (static run once as reference)."""
    scenario = config.build_scenario()
    rows = []
    if "static" in config.algorithms:
        ref = run_monte_carlo(replace(config, algorithms=("static",), output_dir=None), scenario)
        rows.append({"algorithm": "static", "lambda": "", "mean": ref.mean("static"), "var": ref.var("static")})
    for lam in lambdas:
        s = run_monte_carlo(replace(config, lam=float(lam), algorithms=("locdyn",), output_dir=None), scenario)
        rows.append({"algorithm": "locdyn", "lambda": float(lam), "mean": s.mean("locdyn"), "var": s.var("locdyn")})
    return rows
