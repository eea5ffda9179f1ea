from .budget import BudgetEstimate, BudgetError, estimate_budget
from .config import ConfigError, ExperimentConfig, RngSpec, load_config
from .experiment import (
    ExperimentError,
    ExperimentResult,
    RunRecord,
    derive_seed,
    run_experiment,
    run_kappa_sweep,
)
from .reference import Z_REF, load_reference_table
from .report import emit_report, read_runs, regenerate_report

__all__ = [
    "BudgetEstimate",
    "BudgetError",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentResult",
    "RngSpec",
    "RunRecord",
    "Z_REF",
    "derive_seed",
    "emit_report",
    "estimate_budget",
    "load_config",
    "load_reference_table",
    "read_runs",
    "regenerate_report",
    "run_experiment",
    "run_kappa_sweep",
]
