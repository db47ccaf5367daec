"""scsopt: adaptive-sampling conjugate subgradient solvers for two-stage stochastic programs."""

from .baselines import SgdSolver, SmdSolver, sgd_run, smd_run
from .cli import RunConfig, compare, load_instance, run_experiment
from .linalg import (
    NullSpaceBasis,
    null_space_basis,
    project_affine,
    project_null,
    project_polyhedral,
)
from .model import (
    DeterministicProgram,
    Discrete,
    Normal,
    RandomEntry,
    Scenario,
    ScenarioSampler,
    ScenarioSet,
    TwoStageProblem,
    Uniform,
    draw_scenarios,
    enumerate_support,
    extensive_form,
    initial_feasible_point,
    true_objective,
)
from .native import load_native, parse_native, write_native
from .oracle import (
    RecourseSolution,
    SaaFunction,
    closed_form_dual_value,
    closed_form_multiplier,
    saa_subgrad,
    saa_value,
    solve_lp_recourse,
    solve_qp_bound,
    solve_recourse,
    subgrad_ql,
    subgrad_qq,
)
from .records import CSV_HEADER, IterateRecord, read_history_csv, write_history_csv
from .scs import (
    ScsSolver,
    acceptance_test,
    conjugate_direction,
    hoeffding_bound,
    lambda_star,
    line_search,
    sample_size,
    step_cap,
)
from .smps import assemble, load_smps, parse_core, parse_stoch, parse_time

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER",
    "DeterministicProgram",
    "Discrete",
    "IterateRecord",
    "Normal",
    "NullSpaceBasis",
    "RandomEntry",
    "RecourseSolution",
    "RunConfig",
    "SaaFunction",
    "Scenario",
    "ScenarioSampler",
    "ScenarioSet",
    "ScsSolver",
    "SgdSolver",
    "SmdSolver",
    "TwoStageProblem",
    "Uniform",
    "acceptance_test",
    "assemble",
    "closed_form_dual_value",
    "closed_form_multiplier",
    "compare",
    "conjugate_direction",
    "draw_scenarios",
    "enumerate_support",
    "extensive_form",
    "hoeffding_bound",
    "initial_feasible_point",
    "lambda_star",
    "line_search",
    "load_instance",
    "load_native",
    "load_smps",
    "null_space_basis",
    "parse_core",
    "parse_native",
    "parse_stoch",
    "parse_time",
    "project_affine",
    "project_null",
    "project_polyhedral",
    "read_history_csv",
    "run_experiment",
    "saa_subgrad",
    "saa_value",
    "sample_size",
    "sgd_run",
    "smd_run",
    "solve_lp_recourse",
    "solve_qp_bound",
    "solve_recourse",
    "step_cap",
    "subgrad_ql",
    "subgrad_qq",
    "true_objective",
    "write_history_csv",
    "write_native",
]
