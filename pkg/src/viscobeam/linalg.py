"""Direct solvers (dense and banded LU with partial pivoting) and singular values."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack

DENSE_LIMIT = 2000


class NumericalFailure(RuntimeError):
    """A factorisation or time step broke down."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DenseLU:
    """Dense LU factorisation with partial pivoting."""

    def __init__(self, M):
        M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("LU needs a square matrix")
        lu, piv, info = lapack.dgetrf(M)
        if info > 0 or not np.all(np.isfinite(lu)):
            raise NumericalFailure("matrix is exactly singular")
        self.lu, self.piv = lu, piv
        self.n = M.shape[0]

    def solve(self, rhs) -> np.ndarray:
        x, info = lapack.dgetrs(self.lu, self.piv, np.asarray(rhs, dtype=float))
        if info != 0:
            raise NumericalFailure("dense triangular solve failed")
        return x


class BandedLU:
    """LU of a sparse matrix with small bandwidth after a symmetric reordering.

    ``perm[i]`` is the original index placed at position ``i``; the factor is
    stored in LAPACK ``gb`` layout so the march kernels can call ``dgbtrs``
    directly.
    """

    def __init__(self, M, perm=None):
        M = sp.csr_matrix(M)
        n = M.shape[0]
        if M.shape != (n, n):
            raise ValueError("LU needs a square matrix")
        perm = np.arange(n) if perm is None else np.asarray(perm, dtype=np.int64)
        iperm = np.empty_like(perm)
        iperm[perm] = np.arange(n)
        P = M[perm][:, perm].tocoo()
        off = P.col - P.row
        kl = int(max(0, -off.min())) if off.size else 0
        ku = int(max(0, off.max())) if off.size else 0
        ab = np.zeros((2 * kl + ku + 1, n), order="F")
        ab[kl + ku + P.row - P.col, P.col] = P.data
        lub, piv, info = lapack.dgbtrf(ab, kl, ku)
        if info > 0:
            raise NumericalFailure("matrix is exactly singular")
        self.ab = np.asfortranarray(lub)
        self.piv = np.ascontiguousarray(piv, dtype=np.int32)
        # the scipy wrappers shift pivots to 0-based; raw LAPACK wants 1-based
        self.piv_fortran = self.piv + np.int32(1)
        self.kl, self.ku, self.n = kl, ku, n
        self.perm, self.iperm = perm, iperm

    def solve_permuted(self, rhs) -> np.ndarray:
        x, info = lapack.dgbtrs(self.ab, self.kl, self.ku, rhs, self.piv)
        if info != 0:
            raise NumericalFailure("banded triangular solve failed")
        return x

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self.solve_permuted(rhs[self.perm])
        return x[self.iperm]


def factorize(M, perm=None, dense_limit: int = DENSE_LIMIT):
    """Dense LU for small systems, banded LU (after ``perm``) for large ones."""
    n = M.shape[0]
    if n <= dense_limit:
        return DenseLU(M)
    return BandedLU(M, perm)


def lu_solve(M, rhs) -> np.ndarray:
    """Solve ``M x = rhs`` by LU with partial pivoting."""
    return DenseLU(M).solve(rhs)


def singular_values(M) -> np.ndarray:
    """Singular values in nonincreasing order."""
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def coordinate_permutation(coords, block_ids=None) -> np.ndarray:
    """Stable ordering of unknowns by coordinate (ties broken by block)."""
    coords = np.asarray(coords, dtype=float)
    if block_ids is None:
        return np.argsort(coords, kind="stable")
    return np.lexsort((np.asarray(block_ids), coords))


def null_space(M, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of ``ker M`` (columns)."""
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    return sla.null_space(M, rcond=rtol)
