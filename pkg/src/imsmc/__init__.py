"""Discrete-time sliding mode control with online input-mapping co-design.

Implements a robust disturbance-compensated SMC baseline and a controller
that co-designs the sliding surface gain, the convergence parameter and a
linear combination of recent input/state history by solving a stationarity
system online, plus a closed-loop experiment harness and CLI.
"""

from .plant import Plant, RegularForm, DisturbanceSchedule, to_regular_form, step
from .surface import (
    LmiSolution,
    SurfaceGain,
    LmiInfeasibleError,
    design_g_lmi,
    verify_quadratic_stability,
)
from .reaching import (
    ReachingParams,
    CompensatorState,
    sgn,
    update_compensator,
    robust_smc_control,
)
from .mapping import (
    HistoryBuffer,
    CoDesignContext,
    CoDesignSolution,
    QsmbBand,
    ResidualPair,
    BandUndefinedError,
    push,
    objective_j,
    stationarity_residual,
    co_design_solve,
    solve_l_frozen,
    qsmb_omega,
    imsmc_control,
    band_policy,
)
from .nlsolve import LmOptions, LmResult, levenberg_marquardt, fd_jacobian
from .config import ExperimentConfig, ConfigError, load_config, save_config
from .harness import TrajectoryLog, Metrics, run_experiment, compute_metrics, export_csv, load_csv

__all__ = [
    "Plant", "RegularForm", "DisturbanceSchedule", "to_regular_form", "step",
    "LmiSolution", "SurfaceGain", "LmiInfeasibleError", "design_g_lmi",
    "verify_quadratic_stability",
    "ReachingParams", "CompensatorState", "sgn", "update_compensator",
    "robust_smc_control",
    "HistoryBuffer", "CoDesignContext", "CoDesignSolution", "QsmbBand",
    "ResidualPair", "BandUndefinedError", "push", "objective_j",
    "stationarity_residual", "co_design_solve", "solve_l_frozen", "qsmb_omega",
    "imsmc_control", "band_policy",
    "LmOptions", "LmResult", "levenberg_marquardt", "fd_jacobian",
    "ExperimentConfig", "ConfigError", "load_config", "save_config",
    "TrajectoryLog", "Metrics", "run_experiment", "compute_metrics",
    "export_csv", "load_csv",
]
