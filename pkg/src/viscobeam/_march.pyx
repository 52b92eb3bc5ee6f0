# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time-march kernel; see ``_march_py.march_chunk`` for the contract.

``piv`` must hold 1-based (LAPACK) pivot indices.
"""

from scipy.linalg.cython_lapack cimport dgbtrs


def march_chunk(double[::1, :] ab, int kl, int ku, int[::1] piv,
                double[::1] m_data, int[::1] m_indices, int[::1] m_indptr,
                double[:, ::1] loads, double[:, ::1] S, double[::1] rho,
                double[::1] kappa, double[::1] y, double dt, long n0, long stride,
                double[:, ::1] out):
    cdef int n = y.shape[0]
    cdef int nk = S.shape[0]
    cdef int nrhs = 1, ldab = ab.shape[0], ldb = n, info = 0
    cdef char trans = b'N'
    cdef Py_ssize_t k, i, j, p
    cdef long written = 0
    cdef double acc
    cdef double[::1] hist = y.copy()
    for k in range(loads.shape[0]):
        for j in range(n):
            acc = 0.0
            for i in range(nk):
                acc += kappa[i] * S[i, j]
            hist[j] = acc
        for j in range(n):
            acc = loads[k, j]
            for p in range(m_indptr[j], m_indptr[j + 1]):
                acc += m_data[p] * hist[m_indices[p]]
            y[j] = acc
        dgbtrs(&trans, &n, &kl, &ku, &nrhs, &ab[0, 0], &ldab, &piv[0], &y[0], &ldb, &info)
        if info != 0:
            return -1 - k
        for i in range(nk):
            for j in range(n):
                S[i, j] = rho[i] * (S[i, j] + dt * y[j])
        if (n0 + k) % stride == 0:
            for j in range(n):
                out[written, j] = y[j]
            written += 1
    return written
