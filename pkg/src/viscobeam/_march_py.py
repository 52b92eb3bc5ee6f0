"""Pure-Python time-march kernel (fallback for the compiled extension)."""

from __future__ import annotations

import scipy.sparse as sp
from scipy.linalg import lapack


def march_chunk(ab, kl, ku, piv, m_data, m_indices, m_indptr, loads, S, rho, kappa, y, dt, n0, stride, out):
    """Advance ``loads.shape[0]`` steps of the trapezoidal Volterra march.

    ``piv`` holds 1-based (LAPACK) pivots.  All vectors are in the banded (permuted) ordering.  ``S[i]`` holds the
    weighted history of exponential term ``i`` seen by the next step; ``y`` is
    overwritten with the last state.  Every state whose step index is a
    multiple of ``stride`` is copied into consecutive rows of ``out``.
    Returns the number of rows written.
    """
    n = y.shape[0]
    M = sp.csr_matrix((m_data, m_indices, m_indptr), shape=(n, n))
    written = 0
    for k in range(loads.shape[0]):
        hist = kappa @ S
        rhs = loads[k] + M @ hist
        x, info = lapack.dgbtrs(ab, kl, ku, rhs, piv - 1)
        if info != 0:
            return -1 - k
        y[:] = x
        S += dt * y[None, :]
        S *= rho[:, None]
        if (n0 + k) % stride == 0:
            out[written] = y
            written += 1
    return written
