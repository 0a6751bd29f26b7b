"""Adaptively weighted top-N organ matching: model, baselines, simulator,
ranking metrics and a seeded experiment harness."""

from .matrices import (
    CovariateTable,
    MaskedResponseMatrix,
    flatten,
    project_observed,
    reshape_to_matrix,
    standardize,
)
from .solver import FitResult, SolverConfig, SolverState, cross_validate, solve
from .baselines import solve_lormc, solve_prime
from .simulate import (
    CohortSpec,
    CorrelationScenario,
    KasComponents,
    apply_sparsity,
    build_covariates,
    sample_cohort,
    synthesize_kas,
)
from .metrics import hit_rate, ndcg, nrmse, top_n

__all__ = [
    "CovariateTable",
    "MaskedResponseMatrix",
    "flatten",
    "project_observed",
    "reshape_to_matrix",
    "standardize",
    "FitResult",
    "SolverConfig",
    "SolverState",
    "cross_validate",
    "solve",
    "solve_lormc",
    "solve_prime",
    "CohortSpec",
    "CorrelationScenario",
    "KasComponents",
    "apply_sparsity",
    "build_covariates",
    "sample_cohort",
    "synthesize_kas",
    "hit_rate",
    "ndcg",
    "nrmse",
    "top_n",
]
