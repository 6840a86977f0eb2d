"""Self-adaptive surrogate-assisted CMA-ES."""
from .cma import OptimizerState, RestartPolicy, gen_cma, init_cma, should_restart
from .controller import (
    Archive,
    ControllerConfig,
    RunRecord,
    adjust_lifelength,
    default_hyperparams,
    measure_surrogate_error,
    relax_error,
    run,
)
from .harness import sp1, speedup
from .surrogate import (
    NonViableModel,
    SurrogateHyperParams,
    SurrogateModel,
    WhitenTransform,
    kernel,
    kernel_width,
    predict,
    train_ranking_svm,
    violation_costs,
    whiten,
)
from .testbed import BenchmarkProblem, make_problem

__all__ = [
    "Archive",
    "BenchmarkProblem",
    "ControllerConfig",
    "NonViableModel",
    "OptimizerState",
    "RestartPolicy",
    "RunRecord",
    "SurrogateHyperParams",
    "SurrogateModel",
    "WhitenTransform",
    "adjust_lifelength",
    "default_hyperparams",
    "gen_cma",
    "init_cma",
    "kernel",
    "kernel_width",
    "make_problem",
    "measure_surrogate_error",
    "predict",
    "relax_error",
    "run",
    "should_restart",
    "sp1",
    "speedup",
    "train_ranking_svm",
    "violation_costs",
    "whiten",
]
