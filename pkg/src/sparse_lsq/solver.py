"""End-to-end sparse least-squares pipelines.

Both pipelines factor A, sample r columns, solve the reduced least-squares
problem over the sampled columns, and scatter the reduced solution back to a
sparse n-vector with the rescaling weights folded in.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import BudgetError, DimensionMismatchError, RankRangeError
from .linalg import (
    as_matrix,
    as_vector,
    pseudo_inverse_apply,
    svd,
    truncated_solution,
)
from .sampling import deterministic_sampling, random_sampling

__all__ = [
    "SparseSolution",
    "SolveConfig",
    "deterministic_budget",
    "randomized_budget",
    "scatter",
    "solve_deterministic",
    "solve_randomized",
    "solve_baselines",
]

MODES = ("deterministic", "randomized")


@dataclass(frozen=True)
class SparseSolution:
    """Sparse n-vector stored as sorted (index, value) pairs."""

    dim: int
    nonzeros: tuple
    budget_r: int

    def __post_init__(self):
        pairs = tuple((int(i), float(v)) for i, v in self.nonzeros)
        idx = [i for i, _ in pairs]
        if len(pairs) > self.budget_r:
            raise BudgetError(
                f"{len(pairs)} stored entries exceed the budget {self.budget_r}"
            )
        if idx != sorted(set(idx)):
            raise ValueError("indices must be strictly increasing and distinct")
        if idx and (idx[0] < 0 or idx[-1] >= self.dim):
            raise IndexError("indices out of range")
        if not all(math.isfinite(v) for _, v in pairs):
            raise ValueError("values must be finite")
        object.__setattr__(self, "nonzeros", pairs)

    @property
    def indices(self):
        return np.array([i for i, _ in self.nonzeros], dtype=np.intp)

    @property
    def values(self):
        return np.array([v for _, v in self.nonzeros])

    def densify(self):
        x = np.zeros(self.dim)
        if self.nonzeros:
            x[self.indices] = self.values
        return x


@dataclass(frozen=True)
class SolveConfig:
    """Run parameters: rank k, accuracy epsilon in (0, 1/2), mode, seed."""

    k: int
    epsilon: float
    mode: str = "deterministic"
    seed: int | None = None
    r_override: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise RankRangeError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(
                f"epsilon must lie strictly in (0, 1/2), got {self.epsilon}"
            )
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def deterministic_budget(k, epsilon):
    """Sparsity budget ceil(9 k / epsilon^2) of the deterministic pipeline."""
    return math.ceil(9 * k / epsilon**2)


def randomized_budget(k, epsilon):
    """Sparsity budget ceil(36 k ln(20 k) / epsilon^2) of the randomized one."""
    return math.ceil(36 * k * math.log(20 * k) / epsilon**2)


def scatter(x_r, plan, n, budget=None):
    """Embed the reduced solution into a sparse n-vector.

    The plan's scale factors are folded into the scattered values, so that
    A @ densify(result) equals C @ x_r exactly, with C the sampled matrix.
    The plan must have distinct indices (merge repeats first).
    """
    x_r = as_vector(x_r, "x_r")
    if plan.has_repeats:
        raise ValueError("plan has repeated indices; call plan.merged() first")
    if x_r.shape[0] != plan.r:
        raise DimensionMismatchError(
            f"x_r has dim {x_r.shape[0]}, plan selects {plan.r} distinct columns"
        )
    if plan.source_dim != n:
        raise DimensionMismatchError(
            f"plan is over {plan.source_dim} columns, expected {n}"
        )
    pairs = sorted(zip(plan.selected.tolist(), (plan.scales * x_r).tolist()))
    return SparseSolution(
        dim=n,
        nonzeros=tuple(pairs),
        budget_r=int(budget) if budget is not None else plan.r,
    )


def _prepare(a, b, cfg):
    a = as_matrix(a, "a")
    b = as_vector(b, "b")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatchError(
            f"b has dim {b.shape[0]}, A has {a.shape[0]} rows"
        )
    f = svd(a)
    if cfg.k >= f.numerical_rank:
        raise RankRangeError(
            f"k must be < rank(A) = {f.numerical_rank}, got {cfg.k}"
        )
    return a, b, f


def _reduced_solve(a, b, plan, budget):
    c = plan.apply(a)
    x_r, *_ = np.linalg.lstsq(c, b, rcond=None)
    return scatter(x_r, plan, a.shape[1], budget=budget)


def solve_deterministic(a, b, cfg):
    """Sparse solution via dual-set column selection.

    Computes the SVD of A, forms the rank-k residual E = A - A_k, selects
    r = ceil(9 k / eps^2) columns (or ``cfg.r_override``) with
    :func:`deterministic_sampling`, and solves least squares over the
    sampled columns.  Returns ``(solution, plan)``.
    """
    a, b, f = _prepare(a, b, cfg)
    n = a.shape[1]
    if cfg.r_override is not None:
        r = int(cfg.r_override)
        if not cfg.k < r <= n:
            raise BudgetError(f"r_override must satisfy k < r <= n, got {r}")
    else:
        r = deterministic_budget(cfg.k, cfg.epsilon)
        if r > n:
            raise BudgetError(
                f"budget r = {r} exceeds the column count n = {n}; "
                f"pass r_override to run below the guaranteed budget"
            )
    v_t = f.v[:, : cfg.k].T
    e = a - (f.u[:, : cfg.k] * f.sigma[: cfg.k]) @ v_t
    plan = deterministic_sampling(v_t, e, r)
    return _reduced_solve(a, b, plan, r), plan


def solve_randomized(a, b, cfg):
    """Sparse solution via leverage-score sampling.

    Draws r = ceil(36 k ln(20 k) / eps^2) columns (or ``cfg.r_override``)
    i.i.d. from the leverage distribution of the top-k right singular
    subspace.  Repeated draws are merged into single columns before the
    reduced solve, so the nonzero count never exceeds min(r, n).  Requires
    an explicit seed.  Returns ``(solution, plan)`` with the raw plan
    (repeats included).
    """
    if cfg.seed is None:
        raise ValueError("randomized mode requires an explicit seed")
    a, b, f = _prepare(a, b, cfg)
    if cfg.r_override is not None:
        r = int(cfg.r_override)
        if r < cfg.k:
            raise BudgetError(f"r_override must be >= k, got {r}")
    else:
        r = randomized_budget(cfg.k, cfg.epsilon)
    v_t = f.v[:, : cfg.k].T
    plan = random_sampling(v_t, r, np.random.default_rng(int(cfg.seed)))
    return _reduced_solve(a, b, plan.merged(), r), plan


def solve_baselines(a, b, k):
    """Dense reference solutions: minimum-norm A^+ b and rank-k A_k^+ b."""
    cfg = SolveConfig(k=int(k), epsilon=0.25)
    a, b, f = _prepare(a, b, cfg)
    return pseudo_inverse_apply(f, b), truncated_solution(f, k, b)
