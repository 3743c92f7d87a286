"""Distributed, dynamics-aware range-only network localization.

Quick start::

    from locdyn import make_scenario, simulate_measurements, run_trajectory, SolverConfig

    sc = make_scenario("lap")
    stream = simulate_measurements(sc, sigma=1.0, seed=7)
    est = run_trajectory(sc, 1.0, None, SolverConfig(lam=0.5), seed=7, measurements=stream)
"""

__version__ = "0.1.0"

from .baselines import KalmanState, kalman_step, run_kalman, run_static, static_solve
from .convex import (
    ConvexConstants,
    compute_constants,
    f_value,
    fhat_grad,
    fhat_value,
    g_grad,
    g_value,
    project_ball,
)
from .measurements import MeasurementSet, OutlierConfig, inject_outliers, sample_ranges, simulate_measurements
from .network import NetworkGraph, build_network, check_localizability, incidence_and_laplacian, load_network
from .solver import (
    EstimateHistory,
    SolverConfig,
    distributed_round_trace,
    node_gradient,
    predict,
    run_trajectory,
    solve_step,
)
from .trajectories import Scenario, gen_lap, gen_lawnmower, gen_spiral, make_scenario, place_anchors
from .velocity import PositionHistory, central_diff, estimate_velocity, smooth_fir, taylor6

__all__ = [
    "ConvexConstants", "EstimateHistory", "KalmanState", "MeasurementSet", "NetworkGraph", "OutlierConfig",
    "PositionHistory", "Scenario", "SolverConfig", "build_network", "central_diff", "check_localizability",
    "compute_constants", "distributed_round_trace", "estimate_velocity", "f_value", "fhat_grad", "fhat_value",
    "g_grad", "g_value", "gen_lap", "gen_lawnmower", "gen_spiral", "incidence_and_laplacian", "inject_outliers",
    "kalman_step", "load_network", "make_scenario", "node_gradient", "place_anchors", "predict", "project_ball",
    "run_kalman", "run_static", "run_trajectory", "sample_ranges", "simulate_measurements", "smooth_fir",
    "solve_step", "static_solve", "taylor6",
]
