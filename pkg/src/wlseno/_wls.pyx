# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched WLS solver: column scaling + pivoted Householder QR + rank truncation.

Same contract as ``wlseno._wls_py.wls_solve``; one system per batch entry.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef void _solve_one(const double[:, :] A, const double[:] w, const double[:, :] rhs,
                     double rank_tol, double[:, :] coef, double[:] rdiag,
                     long long* rank_out, double* M, double* b, double* scale,
                     long long* perm, double* v, double* cn) noexcept nogil:
    cdef Py_ssize_t n = A.shape[0], p = A.shape[1], k = rhs.shape[1]
    cdef Py_ssize_t i, j, c, piv, steps, r
    cdef double s, alpha, xnorm, vv, tau, best, t, d0

    for i in range(n):
        for c in range(p):
            M[i * p + c] = w[i] * A[i, c]
        for c in range(k):
            b[i * k + c] = w[i] * rhs[i, c]
    for c in range(p):
        s = 0.0
        for i in range(n):
            s += M[i * p + c] * M[i * p + c]
        s = sqrt(s)
        scale[c] = 1.0 / s if s > 0.0 else 1.0
        for i in range(n):
            M[i * p + c] *= scale[c]
        perm[c] = c
        rdiag[c] = 0.0

    steps = n if n < p else p
    for j in range(steps):
        best = -1.0
        piv = j
        for c in range(j, p):
            s = 0.0
            for i in range(j, n):
                s += M[i * p + c] * M[i * p + c]
            cn[c] = s
            if s > best:
                best = s
                piv = c
        if piv != j:
            for i in range(n):
                t = M[i * p + j]
                M[i * p + j] = M[i * p + piv]
                M[i * p + piv] = t
            i = perm[j]
            perm[j] = perm[piv]
            perm[piv] = i

        xnorm = 0.0
        for i in range(j, n):
            v[i] = M[i * p + j]
            xnorm += v[i] * v[i]
        xnorm = sqrt(xnorm)
        alpha = -xnorm if v[j] >= 0.0 else xnorm
        v[j] -= alpha
        vv = 0.0
        for i in range(j, n):
            vv += v[i] * v[i]
        if vv > 0.0:
            tau = 2.0 / vv
            for c in range(j, p):
                s = 0.0
                for i in range(j, n):
                    s += v[i] * M[i * p + c]
                s *= tau
                for i in range(j, n):
                    M[i * p + c] -= s * v[i]
            for c in range(k):
                s = 0.0
                for i in range(j, n):
                    s += v[i] * b[i * k + c]
                s *= tau
                for i in range(j, n):
                    b[i * k + c] -= s * v[i]
        rdiag[j] = M[j * p + j]

    d0 = fabs(rdiag[0])
    r = 0
    for j in range(steps):
        if fabs(rdiag[j]) > 0.0 and fabs(rdiag[j]) >= rank_tol * d0:
            r += 1
        else:
            break
    rank_out[0] = r

    # back substitution on the leading r x r block; reuse b rows as y
    for c in range(k):
        for j in range(r - 1, -1, -1):
            s = b[j * k + c]
            for i in range(j + 1, r):
                s -= M[j * p + i] * b[i * k + c]
            b[j * k + c] = s / M[j * p + j]
        for j in range(p):
            coef[j, c] = 0.0
        for j in range(r):
            coef[perm[j], c] = b[j * k + c] * scale[perm[j]]


def wls_solve(A, a_index, w, rhs, double rank_tol=1e-10):
    """Batched weighted least squares; see ``wlseno._wls_py.wls_solve``."""
    cdef double[:, :, ::1] A_ = np.ascontiguousarray(A, dtype=np.float64)
    cdef long long[::1] idx = np.ascontiguousarray(a_index, dtype=np.int64)
    cdef double[:, ::1] w_ = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[:, :, ::1] rhs_ = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t B = idx.shape[0], n = A_.shape[1], p = A_.shape[2], k = rhs_.shape[2]
    if w_.shape[0] != B or rhs_.shape[0] != B or w_.shape[1] != n or rhs_.shape[1] != n:
        raise ValueError("inconsistent batch shapes")
    coef_arr = np.zeros((B, p, k))
    rank_arr = np.zeros(B, dtype=np.int64)
    rdiag_arr = np.zeros((B, p))
    cdef double[:, :, ::1] coef = coef_arr
    cdef long long[::1] rank = rank_arr
    cdef double[:, ::1] rdiag = rdiag_arr
    cdef double* M = <double*> malloc(n * p * sizeof(double))
    cdef double* b = <double*> malloc(n * k * sizeof(double))
    cdef double* scale = <double*> malloc(p * sizeof(double))
    cdef long long* perm = <long long*> malloc(p * sizeof(long long))
    cdef double* v = <double*> malloc(n * sizeof(double))
    cdef double* cn = <double*> malloc(p * sizeof(double))
    cdef Py_ssize_t q
    if not (M and b and scale and perm and v and cn):
        free(M); free(b); free(scale); free(perm); free(v); free(cn)
        raise MemoryError()
    try:
        with nogil:
            for q in range(B):
                _solve_one(A_[idx[q]], w_[q], rhs_[q], rank_tol, coef[q], rdiag[q],
                           &rank[q], M, b, scale, perm, v, cn)
    finally:
        free(M); free(b); free(scale); free(perm); free(v); free(cn)
    return coef_arr, rank_arr, rdiag_arr
