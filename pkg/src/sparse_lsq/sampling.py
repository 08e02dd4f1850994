"""Column sampling: deterministic dual-set selection and leverage sampling.

Both samplers produce a :class:`SamplingPlan`, the pair of a sampling matrix
(which columns) and a rescaling matrix (positive column weights), stored
compactly as index and scale arrays.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    BarrierViolationError,
    BudgetError,
    DimensionMismatchError,
    DivisionDegeneracyError,
    InfeasibleStepError,
    OrthonormalityError,
    SamplingContractError,
)
from .linalg import as_matrix

__all__ = [
    "SamplingPlan",
    "BarrierState",
    "barrier_potential",
    "lower_barrier",
    "upper_cost",
    "deterministic_sampling",
    "leverage_probabilities",
    "random_sampling",
]

_ORTHO_ATOL = 1e-10


@dataclass(frozen=True)
class SamplingPlan:
    """Ordered column selection with positive rescaling factors.

    Applying the plan to an m x n matrix X yields the m x r matrix whose
    tau-th column is ``scales[tau] * X[:, selected[tau]]``.  Deterministic
    plans carry distinct indices; plans built from i.i.d. draws may repeat.
    """

    source_dim: int
    selected: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        selected = np.asarray(self.selected, dtype=np.intp)
        scales = np.asarray(self.scales, dtype=np.float64)
        if selected.ndim != 1 or scales.ndim != 1:
            raise DimensionMismatchError("selected and scales must be 1-D")
        if selected.shape[0] != scales.shape[0] or selected.shape[0] < 1:
            raise DimensionMismatchError(
                "selected and scales must have equal positive length"
            )
        if selected.min(initial=0) < 0 or selected.max(initial=-1) >= self.source_dim:
            raise IndexError("selected indices out of range")
        if not np.all(np.isfinite(scales)) or np.any(scales <= 0.0):
            raise ValueError("scales must be finite and strictly positive")
        selected.setflags(write=False)
        scales.setflags(write=False)
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "scales", scales)

    @property
    def r(self):
        return int(self.selected.shape[0])

    @property
    def has_repeats(self):
        return len(np.unique(self.selected)) < self.r

    def apply(self, x):
        """Return X Omega S for a matrix with ``source_dim`` columns."""
        x = as_matrix(x, "x")
        if x.shape[1] != self.source_dim:
            raise DimensionMismatchError(
                f"matrix has {x.shape[1]} columns, plan expects {self.source_dim}"
            )
        return x[:, self.selected] * self.scales

    def materialize(self):
        """Dense (Omega, S): n x r selection matrix and r x r diagonal."""
        omega = np.zeros((self.source_dim, self.r))
        omega[self.selected, np.arange(self.r)] = 1.0
        return omega, np.diag(self.scales)

    def merged(self):
        """Collapse repeated indices into one column each.

        Repeats of index j with scales s1, s2, ... merge to a single column
        with scale sqrt(s1^2 + s2^2 + ...), which preserves X Omega S S^T
        Omega^T X^T.  Order of first appearance is kept.
        """
        if not self.has_repeats:
            return self
        first = {}
        weight = {}
        for idx, s in zip(self.selected.tolist(), self.scales.tolist()):
            if idx not in first:
                first[idx] = len(first)
                weight[idx] = 0.0
            weight[idx] += s * s
        order = sorted(first, key=first.get)
        return SamplingPlan(
            source_dim=self.source_dim,
            selected=np.array(order, dtype=np.intp),
            scales=np.sqrt([weight[i] for i in order]),
        )


@dataclass(frozen=True)
class BarrierState:
    """Accumulated matrix, step counter and barrier shift of the greedy loop."""

    b_matrix: np.ndarray
    step: int
    shift: float


def _check_orthonormal_rows(v_t, atol=_ORTHO_ATOL):
    v_t = as_matrix(v_t, "v_t")
    k, n = v_t.shape
    if k > n:
        raise OrthonormalityError(f"expected k <= n rows, got shape {v_t.shape}")
    gram = v_t @ v_t.T
    if not np.allclose(gram, np.eye(k), atol=atol, rtol=0.0):
        raise OrthonormalityError(
            f"rows are not orthonormal (max deviation "
            f"{np.abs(gram - np.eye(k)).max():.3e})"
        )
    return v_t


def barrier_potential(shift, b_matrix):
    """Sum of 1 / (lambda_i - shift) over the eigenvalues of ``b_matrix``.

    The shift must lie strictly below the whole spectrum.
    """
    b = as_matrix(b_matrix, "b_matrix")
    if b.shape[0] != b.shape[1]:
        raise DimensionMismatchError("b_matrix must be square")
    lam = np.linalg.eigvalsh(b)
    if shift >= lam[0]:
        raise BarrierViolationError(
            f"shift {shift} is not below the smallest eigenvalue {lam[0]}"
        )
    return float(np.sum(1.0 / (lam - shift)))


def lower_barrier(v, state):
    """Largest admissible inverse weight for adding v v^T at this step.

    Uses the shifted barrier at l' = shift + 1: the quadratic form in
    (B - l' I)^-2 over the potential increase, minus the form in
    (B - l' I)^-1.  Requires l' strictly below the spectrum of B.
    """
    v = np.asarray(v, dtype=np.float64)
    b = as_matrix(state.b_matrix, "b_matrix")
    if v.ndim != 1 or v.shape[0] != b.shape[0]:
        raise DimensionMismatchError("v must be a k-vector matching b_matrix")
    lo = float(state.shift)
    hi = lo + 1.0
    lam, q = np.linalg.eigh(b)
    if hi >= lam[0]:
        raise BarrierViolationError(
            f"shifted barrier {hi} is not below the smallest eigenvalue {lam[0]}"
        )
    delta = float(np.sum(1.0 / (lam - hi)) - np.sum(1.0 / (lam - lo)))
    if delta <= 0.0:
        raise DivisionDegeneracyError(f"potential difference {delta} is not positive")
    w = q.T @ v
    quad2 = float(np.sum(w * w / (lam - hi) ** 2))
    quad1 = float(np.sum(w * w / (lam - hi)))
    return quad2 / delta - quad1


def upper_cost(e, residual_fnorm_sq, k, r):
    """Per-step budget charge of a residual column: its share of the total
    residual energy, shrunk by (1 - sqrt(k/r))."""
    if r <= k:
        raise BudgetError(f"need r > k, got r={r}, k={k}")
    if residual_fnorm_sq <= 0.0:
        raise ValueError("residual_fnorm_sq must be positive")
    e = np.asarray(e, dtype=np.float64)
    return float(e @ e / residual_fnorm_sq) * (1.0 - math.sqrt(k / r))


def deterministic_sampling(v_t, e, r, on_step=None):
    """Greedy dual-set column selection.

    Walks r steps of a two-barrier potential argument: a lower barrier on the
    spectrum of the accumulated k x k matrix B (keeping its smallest
    eigenvalue above the moving shift tau - sqrt(r k)) and an energy budget
    on the selected residual columns.  At each step it picks, among columns
    whose upper cost does not exceed their lower-barrier allowance, the one
    with the largest allowance-minus-cost gap (lowest index on ties), adds
    weight 1/allowance to B, and accumulates that weight on the column.
    Final weights are scaled by (1 - sqrt(k/r)) / r.

    Parameters
    ----------
    v_t : (k, n) array_like
        Matrix with orthonormal rows (right singular subspace, transposed).
    e : (m, n) array_like
        Residual matrix sampled alongside ``v_t``.
    r : int
        Number of selection steps, k < r <= n.
    on_step : callable, optional
        Called after every update with the current :class:`BarrierState`.

    Returns
    -------
    SamplingPlan
        Distinct selected indices (repeats merged) with positive scales,
        satisfying sigma_k(V^T Omega S) >= 1 - sqrt(k/r) and
        ||E Omega S||_F <= ||E||_F.
    """
    v_t = _check_orthonormal_rows(v_t)
    e = as_matrix(e, "e")
    k, n = v_t.shape
    if e.shape[1] != n:
        raise DimensionMismatchError(
            f"e has {e.shape[1]} columns, expected {n}"
        )
    r = int(r)
    if not k < r <= n:
        raise BudgetError(f"need k < r <= n, got k={k}, r={r}, n={n}")

    shrink = 1.0 - math.sqrt(k / r)
    col_energy = np.sum(e * e, axis=0)
    total_energy = float(col_energy.sum())
    # Zero residual charges nothing; otherwise each column's cost is its
    # energy share times the shrink factor.
    if total_energy > 0.0:
        costs = col_energy / total_energy * shrink
    else:
        costs = np.zeros(n)

    b = np.zeros((k, k))
    weights = np.zeros(n)
    seen = np.zeros(n, dtype=bool)
    order = []
    sqrt_rk = math.sqrt(r * k)
    for step in range(r):
        shift = step - sqrt_rk
        hi = shift + 1.0
        lam, q = np.linalg.eigh(b)
        if lam[0] <= shift:
            raise BarrierViolationError(
                f"barrier crossed the spectrum at step {step}: "
                f"lambda_min={lam[0]}, shift={shift}"
            )
        if lam[0] <= hi:
            raise BarrierViolationError(
                f"shifted barrier crossed the spectrum at step {step}: "
                f"lambda_min={lam[0]}, shift'={hi}"
            )
        delta = float(np.sum(1.0 / (lam - hi)) - np.sum(1.0 / (lam - shift)))
        if delta <= 0.0:
            raise DivisionDegeneracyError(
                f"potential difference {delta} is not positive at step {step}"
            )
        w = q.T @ v_t
        w2 = w * w
        quad2 = np.sum(w2 / (lam - hi)[:, None] ** 2, axis=0)
        quad1 = np.sum(w2 / (lam - hi)[:, None], axis=0)
        allowances = quad2 / delta - quad1

        feasible = (allowances >= costs) & (allowances > 0.0)
        if not feasible.any():
            raise InfeasibleStepError(step, float((allowances - costs).max()))
        gaps = np.where(feasible, allowances - costs, -np.inf)
        i = int(np.argmax(gaps))

        t = 1.0 / allowances[i]
        weights[i] += t
        b += t * np.outer(v_t[:, i], v_t[:, i])
        if not seen[i]:
            seen[i] = True
            order.append(i)
        if on_step is not None:
            on_step(BarrierState(b_matrix=b.copy(), step=step, shift=shift))

    sel = np.array(order, dtype=np.intp)
    plan = SamplingPlan(
        source_dim=n,
        selected=sel,
        scales=np.sqrt(weights[sel] * (shrink / r)),
    )
    _verify_dual_set_contract(v_t, e, plan, shrink, total_energy)
    return plan


def _verify_dual_set_contract(v_t, e, plan, shrink, total_energy, slack=1e-9):
    # Output contract re-checked after merging; failure means a bug upstream.
    k = v_t.shape[0]
    sampled = plan.apply(v_t)
    sigma = np.linalg.svd(sampled, compute_uv=False)
    sigma_k = sigma[k - 1] if sigma.size >= k else 0.0
    if sigma_k < shrink - slack:
        raise SamplingContractError(
            f"sigma_k of the sampled subspace is {sigma_k}, below {shrink}"
        )
    picked_energy = float(np.sum(plan.apply(e) ** 2))
    if picked_energy > total_energy + slack * max(1.0, total_energy):
        raise SamplingContractError(
            f"sampled residual energy {picked_energy} exceeds {total_energy}"
        )


def leverage_probabilities(v_t):
    """Sampling probabilities (1/k) * ||v_i||^2 for each column of ``v_t``."""
    v_t = _check_orthonormal_rows(v_t)
    k = v_t.shape[0]
    return np.sum(v_t * v_t, axis=0) / k


def random_sampling(v_t, r, rng):
    """Draw r columns i.i.d. from the leverage distribution of ``v_t``.

    ``rng`` must be an explicit seed (int) or a ``numpy.random.Generator``;
    draws use inverse-CDF lookup on the cumulative probability table, so a
    fixed seed reproduces the plan exactly.  The tau-th scale is
    1 / sqrt(p_i * r) for the drawn index i.  Zero-probability columns are
    never drawn.
    """
    if rng is None:
        raise ValueError("rng is required: pass a seed or a numpy Generator")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(int(rng))
    r = int(r)
    if r < 1:
        raise BudgetError(f"need r >= 1, got r={r}")
    probs = leverage_probabilities(v_t)
    n = probs.shape[0]
    cum = np.cumsum(probs)
    cum[-1] = max(cum[-1], 1.0)
    draws = rng.random(r)
    idx = np.searchsorted(cum, draws, side="right")
    idx = np.minimum(idx, n - 1)
    return SamplingPlan(
        source_dim=n,
        selected=idx.astype(np.intp),
        scales=1.0 / np.sqrt(probs[idx] * r),
    )
