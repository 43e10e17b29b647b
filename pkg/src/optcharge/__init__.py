"""Decision-focused learning for EV charging station scheduling.

The pipeline: synthesize price-responsive customer demand data, schedule
charging by solving a convex QP, differentiate the optimal schedule
through its optimality conditions, and train a demand forecaster either
on prediction error (two-step) or directly on the realized operation cost
(end-to-end).
"""

from .config import ExperimentConfig, default_config, load_config
from .diffopt import KKTSystem, assemble_kkt_system, grad_wrt_e_hat
from .learner import (
    EvalReport,
    ForecasterParams,
    TrainConfig,
    compare_runs,
    evaluate,
    forecast,
    train_e2e,
    train_two_step,
)
from .model import (
    QPProblem,
    QPSolution,
    Session,
    StationConfig,
    build_matrices,
    build_qp,
    task_loss,
)
from .pbdr import (
    Dataset,
    PiecewiseQuadraticPattern,
    UtilityMaxPattern,
    generate_dataset,
    generate_population,
    piecewise_quadratic_demand,
    utility_max_demand,
)
from .qpsolver import SolverSettings, solve_qp

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EvalReport",
    "ExperimentConfig",
    "ForecasterParams",
    "KKTSystem",
    "PiecewiseQuadraticPattern",
    "QPProblem",
    "QPSolution",
    "Session",
    "SolverSettings",
    "StationConfig",
    "TrainConfig",
    "UtilityMaxPattern",
    "assemble_kkt_system",
    "build_matrices",
    "build_qp",
    "compare_runs",
    "default_config",
    "evaluate",
    "forecast",
    "generate_dataset",
    "generate_population",
    "grad_wrt_e_hat",
    "load_config",
    "piecewise_quadratic_demand",
    "solve_qp",
    "task_loss",
    "train_e2e",
    "train_two_step",
    "utility_max_demand",
]
