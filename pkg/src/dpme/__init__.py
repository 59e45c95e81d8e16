"""Truncated Dirichlet process mixtures fitted by kernel mean-embedding matching."""

from .errors import (
    DataError,
    DegenerateDataError,
    DpmeError,
    InvariantError,
    ParameterError,
    PartitionError,
)
from .gaussian import GaussianComponent, log_density_matrix, stack_params
from .inference import (
    DEFAULT_COMP_COV_SCALE,
    DEFAULT_WEIGHT_FLOOR,
    FitConfig,
    FitResult,
    assign_latents,
    effective_components,
    fit,
    init_atoms,
)
from .rkhs_embedding import (
    Dataset,
    EmbeddingGram,
    KernelConfig,
    TruncatedDPMM,
    TruncationDecayResult,
    assemble_gram,
    component_data_inner,
    component_inner,
    empirical_self_term,
    kernel_eval,
    mc_component_data_inner,
    mc_component_inner,
    median_heuristic_bandwidth,
    mmd_squared,
    truncation_decay_check,
)
from .rng import derive_rng, make_rng
from .simplex_qp import (
    QPProblem,
    QPSolution,
    brute_force_solve,
    kkt_residual,
    project_simplex,
    solve_qp,
)
from .stick_breaking import (
    BaseMeasure,
    DirichletMarginalReport,
    StickBreakingDraw,
    choose_truncation,
    dirichlet_marginal_check,
    expected_tail_mass,
    sample_betas,
    sample_draw,
    sample_tail_masses,
    weights_from_betas,
)
from .validation import SUITES, SuiteResult, run_suites

__version__ = "0.1.0"

__all__ = [
    "BaseMeasure",
    "DEFAULT_COMP_COV_SCALE",
    "DEFAULT_WEIGHT_FLOOR",
    "DataError",
    "Dataset",
    "DegenerateDataError",
    "DirichletMarginalReport",
    "DpmeError",
    "EmbeddingGram",
    "FitConfig",
    "FitResult",
    "GaussianComponent",
    "InvariantError",
    "KernelConfig",
    "ParameterError",
    "PartitionError",
    "QPProblem",
    "QPSolution",
    "SUITES",
    "StickBreakingDraw",
    "SuiteResult",
    "TruncatedDPMM",
    "TruncationDecayResult",
    "assemble_gram",
    "assign_latents",
    "brute_force_solve",
    "choose_truncation",
    "component_data_inner",
    "component_inner",
    "derive_rng",
    "dirichlet_marginal_check",
    "effective_components",
    "empirical_self_term",
    "expected_tail_mass",
    "fit",
    "init_atoms",
    "kernel_eval",
    "kkt_residual",
    "log_density_matrix",
    "make_rng",
    "mc_component_data_inner",
    "mc_component_inner",
    "median_heuristic_bandwidth",
    "mmd_squared",
    "project_simplex",
    "run_suites",
    "sample_betas",
    "sample_draw",
    "sample_tail_masses",
    "solve_qp",
    "stack_params",
    "truncation_decay_check",
    "weights_from_betas",
    "__version__",
]
