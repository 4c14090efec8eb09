"""Radar EKF-SLAM with random-matrix landmark extent estimation.

Modules
-------
geometry     2x2 SPD extent matrices, ellipse parameters, Gaussian Wasserstein distance
measurement  polar -> Cartesian conversion, Jacobians and Cartesian noise
extent       ellipse-fit (EFA) initializer/baseline and the random-matrix (RMA) filter
slam         augmented-state EKF-SLAM with extent-aware association and noise
simulator    seeded car-park scenario and radar/odometry stream
harness      trials, Monte Carlo aggregation and export
cli          ``rmslam`` command-line front end
"""

from .config import ConfigError, RunConfig, load_config
from .extent import ExtentState, MeasurementBatch, efa_fit, init_extent, predict_extent, update_extent
from .geometry import EllipseParams, gwd, params_to_spd, spd_to_params
from .harness import Report, TrialMetrics, run_monte_carlo, run_trial
from .simulator import SimConfig, build_carpark, generate_scans
from .slam import SlamConfig, SlamState, step

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EllipseParams",
    "ExtentState",
    "MeasurementBatch",
    "Report",
    "RunConfig",
    "SimConfig",
    "SlamConfig",
    "SlamState",
    "TrialMetrics",
    "build_carpark",
    "efa_fit",
    "generate_scans",
    "gwd",
    "init_extent",
    "load_config",
    "params_to_spd",
    "predict_extent",
    "run_monte_carlo",
    "run_trial",
    "spd_to_params",
    "step",
    "update_extent",
]
