"""Dense matrix kernel: SVD, pseudo-inverse, truncation, norms, baselines.

All operations take and return plain ``numpy`` arrays (float64, row-major).
Inputs are validated for finiteness on entry; no operation mutates its
arguments.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    DimensionMismatchError,
    IterationFailureError,
    NonFiniteError,
    RankRangeError,
)

__all__ = [
    "SvdFactorization",
    "as_matrix",
    "as_vector",
    "svd",
    "pseudo_inverse_apply",
    "truncate",
    "truncated_solution",
    "frobenius_norm",
    "spectral_norm",
    "residual_norm",
]

# Relative numerical-rank cutoff applied against sigma_1 when the caller
# does not supply one is DEFAULT_RANK_RTOL * max(m, n).
DEFAULT_RANK_RTOL = 1e-12


def as_matrix(a, name="matrix"):
    """Validate and return ``a`` as a finite 2-D float64 array."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return a


def as_vector(b, name="vector"):
    """Validate and return ``b`` as a finite 1-D float64 array."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return b


@dataclass(frozen=True)
class SvdFactorization:
    """Thin SVD truncated at the numerical rank.

    ``u`` is m x rank with orthonormal columns, ``sigma`` the positive
    singular values in non-increasing order, ``v`` n x rank with orthonormal
    columns.  Equal singular values keep the eigensolver's output order, so
    repeated runs are reproducible.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    numerical_rank: int
    rank_tolerance: float

    @property
    def rows(self):
        return self.u.shape[0]

    @property
    def cols(self):
        return self.v.shape[0]

    def reconstruct(self):
        """Return u @ diag(sigma) @ v.T as a dense array."""
        return (self.u * self.sigma) @ self.v.T


def svd(a, rank_tolerance=None):
    """Compute the thin SVD of ``a`` keeping only numerically nonzero values.

    Parameters
    ----------
    a : (m, n) array_like
        Matrix to factor.
    rank_tolerance : float, optional
        Relative cutoff: singular values <= rank_tolerance * sigma_1 are
        dropped.  Defaults to ``DEFAULT_RANK_RTOL * max(m, n)``.

    Returns
    -------
    SvdFactorization
    """
    a = as_matrix(a)
    if rank_tolerance is None:
        rank_tolerance = DEFAULT_RANK_RTOL * max(a.shape)
    if rank_tolerance < 0:
        raise ValueError("rank_tolerance must be nonnegative")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise IterationFailureError(f"SVD did not converge: {exc}") from exc
    if s.size and s[0] > 0.0:
        rank = int(np.count_nonzero(s > rank_tolerance * s[0]))
    else:
        rank = 0
    f = SvdFactorization(
        u=u[:, :rank].copy(),
        sigma=s[:rank].copy(),
        v=vt[:rank].T.copy(),
        numerical_rank=rank,
        rank_tolerance=float(rank_tolerance),
    )
    for arr in (f.u, f.sigma, f.v):
        arr.setflags(write=False)
    return f


def pseudo_inverse_apply(f, b):
    """Minimum-norm least-squares solution V diag(1/sigma) U^T b."""
    b = as_vector(b)
    if b.shape[0] != f.rows:
        raise DimensionMismatchError(
            f"vector has dim {b.shape[0]}, matrix has {f.rows} rows"
        )
    if f.numerical_rank == 0:
        return np.zeros(f.cols)
    return f.v @ ((f.u.T @ b) / f.sigma)


def truncate(f, k):
    """Keep the leading k singular triples of ``f``.

    k must satisfy 1 <= k < f.numerical_rank; a rank-k factorization of a
    rank-k matrix is the matrix itself and is rejected.
    """
    k = int(k)
    if not 1 <= k < f.numerical_rank:
        raise RankRangeError(
            f"k must satisfy 1 <= k < rank ({f.numerical_rank}), got {k}"
        )
    return SvdFactorization(
        u=f.u[:, :k],
        sigma=f.sigma[:k],
        v=f.v[:, :k],
        numerical_rank=k,
        rank_tolerance=f.rank_tolerance,
    )


def truncated_solution(f, k, b):
    """Regularized weights from the best rank-k approximation: A_k^+ b."""
    return pseudo_inverse_apply(truncate(f, k), b)


def frobenius_norm(a):
    a = as_matrix(a)
    return float(np.linalg.norm(a, "fro"))


def spectral_norm(a):
    """Largest singular value of ``a``."""
    a = as_matrix(a)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise IterationFailureError(f"SVD did not converge: {exc}") from exc
    return float(s[0]) if s.size else 0.0


def residual_norm(a, x, b):
    """Euclidean norm of A x - b."""
    a = as_matrix(a)
    x = as_vector(x, "x")
    b = as_vector(b, "b")
    if x.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
        raise DimensionMismatchError(
            f"incompatible shapes: A is {a.shape}, x has dim {x.shape[0]}, "
            f"b has dim {b.shape[0]}"
        )
    return float(np.linalg.norm(a @ x - b))


def _require_rank_window(f, k):
    # Shared guard for rank-parameter checks outside truncate().
    if not 1 <= int(k) < f.numerical_rank:
        raise RankRangeError(
            f"k must satisfy 1 <= k < rank ({f.numerical_rank}), got {k}"
        )
    return int(k)


def tail_energy(f, k):
    """Frobenius norm of A - A_k, computed from the trailing spectrum."""
    k = _require_rank_window(f, k)
    return float(math.sqrt(float(np.sum(f.sigma[k:] ** 2))))
