"""Sparse least-squares solutions via column subset selection.

Computes solution vectors with at most r nonzeros whose residual is provably
close to the dense rank-k regularized solution, using either a deterministic
dual-set barrier sampler or randomized leverage-score sampling, and verifies
every guarantee numerically.
"""

from .bounds import (
    BoundReport,
    ProofTrace,
    deterministic_bound_report,
    generalized_bound,
    random_sampler_suite,
    randomized_bound_report,
    structural_bound,
)
from .cli import RunSpec, SyntheticSpec, generate, ingest
from .errors import (
    BarrierViolationError,
    BudgetError,
    DimensionMismatchError,
    DivisionDegeneracyError,
    InfeasibleStepError,
    IterationFailureError,
    NonFiniteError,
    OrthonormalityError,
    ParseError,
    RankRangeError,
    SamplingContractError,
    SparseLsqError,
)
from .linalg import (
    SvdFactorization,
    frobenius_norm,
    pseudo_inverse_apply,
    residual_norm,
    spectral_norm,
    svd,
    truncate,
    truncated_solution,
)
from .sampling import (
    BarrierState,
    SamplingPlan,
    barrier_potential,
    deterministic_sampling,
    leverage_probabilities,
    lower_barrier,
    random_sampling,
    upper_cost,
)
from .solver import (
    SolveConfig,
    SparseSolution,
    deterministic_budget,
    randomized_budget,
    scatter,
    solve_baselines,
    solve_deterministic,
    solve_randomized,
)

__version__ = "1.0.0"

__all__ = [
    "BarrierState",
    "BarrierViolationError",
    "BoundReport",
    "BudgetError",
    "DimensionMismatchError",
    "DivisionDegeneracyError",
    "InfeasibleStepError",
    "IterationFailureError",
    "NonFiniteError",
    "OrthonormalityError",
    "ParseError",
    "ProofTrace",
    "RankRangeError",
    "RunSpec",
    "SamplingContractError",
    "SamplingPlan",
    "SolveConfig",
    "SparseLsqError",
    "SparseSolution",
    "SvdFactorization",
    "SyntheticSpec",
    "barrier_potential",
    "deterministic_bound_report",
    "deterministic_budget",
    "deterministic_sampling",
    "frobenius_norm",
    "generalized_bound",
    "generate",
    "ingest",
    "leverage_probabilities",
    "lower_barrier",
    "pseudo_inverse_apply",
    "random_sampler_suite",
    "random_sampling",
    "randomized_bound_report",
    "randomized_budget",
    "residual_norm",
    "scatter",
    "solve_baselines",
    "solve_deterministic",
    "solve_randomized",
    "spectral_norm",
    "structural_bound",
    "svd",
    "truncate",
    "truncated_solution",
    "upper_cost",
]
