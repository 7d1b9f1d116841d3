"""
Dense linear-algebra kernels
Factorizations, orthonormal null-space and range bases, pseudo-inverses and
subspace-restricted singular values, all with explicit relative rank tolerances.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .errors import EmptySubspaceError, InvalidInputError

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD: M = U @ diag(sigma) @ V.T with sigma nonincreasing"""
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


@dataclass(frozen=True)
class SubspaceMetrics:
    sigma_min: float
    sigma_max: float


@dataclass(frozen=True)
class MatrixMetrics:
    spectral_norm: float
    cond: float
    rank: int
    lambda_max_MMt: float
    lambda_min_MMt: float


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return a read-only 2-D float64 copy of M"""
    a = np.array(M, dtype=float, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return _freeze(a)


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Validate and return a read-only 1-D float64 copy of v"""
    a = np.array(v, dtype=float, copy=True).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return _freeze(a)


def default_rank_tol(M: np.ndarray) -> float:
    """Relative rank tolerance max(rows, cols) * eps"""
    return max(M.shape + (1,)) * EPS


def _resolve_rank_tol(M: np.ndarray, rank_tol: Optional[float]) -> float:
    if rank_tol is None:
        return default_rank_tol(M)
    if not rank_tol > 0:
        raise InvalidInputError(f"rank_tol must be positive, got {rank_tol}")
    return float(rank_tol)


def svd(M) -> SvdResult:
    """Thin singular value decomposition"""
    a = as_matrix(M)
    rows, cols = a.shape
    k = min(rows, cols)
    if k == 0:
        return SvdResult(np.zeros((rows, 0)), np.zeros(0), np.zeros((cols, 0)))
    U, s, Vt = sla.svd(a, full_matrices=False, lapack_driver="gesdd")
    return SvdResult(_freeze(U), _freeze(s), _freeze(Vt.T.copy()))


def singular_values(M) -> np.ndarray:
    a = as_matrix(M)
    if min(a.shape) == 0:
        return np.zeros(0)
    return sla.svd(a, compute_uv=False)


def spectral_norm(M) -> float:
    s = singular_values(M)
    return float(s[0]) if s.size else 0.0


def numerical_rank(M, rank_tol: Optional[float] = None) -> int:
    a = as_matrix(M)
    tol = _resolve_rank_tol(a, rank_tol)
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def _fix_signs(Q: np.ndarray) -> np.ndarray:
    """Make the first nonzero entry of every column positive"""
    Q = np.array(Q, copy=True)
    for j in range(Q.shape[1]):
        col = Q[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            Q[:, j] = -col
    return Q


def nullspace_basis(M, rank_tol: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (as columns) of Ker(M); zero columns if the kernel is trivial"""
    a = as_matrix(M)
    tol = _resolve_rank_tol(a, rank_tol)
    rows, cols = a.shape
    if cols == 0:
        return _freeze(np.zeros((0, 0)))
    if rows == 0:
        return _freeze(np.eye(cols))

    _, s, Vt = sla.svd(a, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    Q = Vt[rank:].T
    logger.debug(f"nullspace_basis: shape {a.shape}, rank {rank}, kernel dim {Q.shape[1]}")
    return _freeze(_fix_signs(Q))


def range_basis(M, rank_tol: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (as columns) of Im(M)"""
    a = as_matrix(M)
    tol = _resolve_rank_tol(a, rank_tol)
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return _freeze(np.zeros((rows, 0)))
    U, s, _ = sla.svd(a, full_matrices=False)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return _freeze(_fix_signs(U[:, :rank]))


def pseudo_inverse(M, rank_tol: Optional[float] = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with a relative rank cut-off"""
    a = as_matrix(M)
    tol = _resolve_rank_tol(a, rank_tol)
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return _freeze(np.zeros((cols, rows)))
    U, s, Vt = sla.svd(a, full_matrices=False)
    keep = s > tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv = (Vt[keep].T / s[keep]) @ U[:, keep].T
    return _freeze(inv)


def subspace_metrics(M, B) -> SubspaceMetrics:
    """Extreme singular values of M restricted to the span of the orthonormal columns of B"""
    a = as_matrix(M)
    basis = np.array(B, dtype=float)
    if basis.ndim == 1:
        basis = basis.reshape(-1, 1)
    if basis.shape[1] == 0:
        raise EmptySubspaceError("subspace basis has zero columns")
    if basis.shape[0] != a.shape[1]:
        raise InvalidInputError(f"basis has {basis.shape[0]} rows, matrix has {a.shape[1]} columns")
    if not np.allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-10, rtol=0.0):
        raise InvalidInputError("subspace basis is not orthonormal")

    d = basis.shape[1]
    s = singular_values(a @ basis)
    sigma_max = float(s[0]) if s.size else 0.0
    # fewer singular values than dimensions means a nontrivial restricted kernel
    sigma_min = float(s[-1]) if s.size == d else 0.0
    return SubspaceMetrics(sigma_min=sigma_min, sigma_max=sigma_max)


def matrix_metrics(M, rank_tol: Optional[float] = None) -> MatrixMetrics:
    a = as_matrix(M)
    tol = _resolve_rank_tol(a, rank_tol)
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return MatrixMetrics(0.0, float("inf"), 0, 0.0, 0.0)

    nonzero = s[s > tol * s[0]]
    rows = a.shape[0]
    # M M^T is rows x rows; it has rows - len(s) extra zero eigenvalues when rows > cols
    lam_min = float(s[-1] ** 2) if s.size == rows else 0.0
    return MatrixMetrics(
        spectral_norm=float(s[0]),
        cond=float(nonzero[0] / nonzero[-1]),
        rank=int(nonzero.size),
        lambda_max_MMt=float(s[0] ** 2),
        lambda_min_MMt=lam_min,
    )
