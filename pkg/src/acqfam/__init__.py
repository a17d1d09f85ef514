"""Bayesian optimization with the improvement-based acquisition family."""

__version__ = "0.1.0"

from .acquisition import (  # noqa: E402
    FamilyParams,
    ImprovementStats,
    family_value,
    improvement_stats,
    named_presets,
    preset,
)
from .engine import OptimizerConfig, RunConfig, RunTrace, maximize_acquisition, run_bo  # noqa: E402
from .gp import Dataset, FitConfig, FittedSurrogate, Hyperparameters, fit, predict  # noqa: E402
from .sampling import latin_hypercube  # noqa: E402
from .testbed import PROBLEMS, TestProblem, evaluate, get_problem, reference_solution  # noqa: E402

__all__ = [
    "Dataset",
    "FamilyParams",
    "FitConfig",
    "FittedSurrogate",
    "Hyperparameters",
    "ImprovementStats",
    "OptimizerConfig",
    "PROBLEMS",
    "RunConfig",
    "RunTrace",
    "TestProblem",
    "evaluate",
    "family_value",
    "fit",
    "get_problem",
    "improvement_stats",
    "latin_hypercube",
    "maximize_acquisition",
    "named_presets",
    "predict",
    "preset",
    "reference_solution",
    "run_bo",
]
