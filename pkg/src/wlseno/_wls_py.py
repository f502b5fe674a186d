"""Pure-numpy batched WLS solver (fallback for the compiled ``_wls`` kernel).

The loop runs over columns; each step is vectorized across the batch.
"""
from __future__ import annotations

import numpy as np


def wls_solve(A, a_index, w, rhs, rank_tol=1e-10, chunk=4096):
    """Solve ``min || diag(w) (A[a_index[b]] x - rhs[b]) ||`` for every ``b``.

    Columns of ``diag(w) A`` are scaled to unit 2-norm, factorized by
    Householder QR with column pivoting, and truncated to the numerical rank
    ``r = #{k : |R_kk| >= rank_tol * |R_00|}``.

    Returns ``(coef, rank, rdiag)`` with shapes (B, p, k), (B,), (B, p).
    """
    A = np.asarray(A, dtype=float)
    a_index = np.asarray(a_index, dtype=np.int64)
    w = np.asarray(w, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    B = a_index.size
    p = A.shape[2]
    k = rhs.shape[2]
    coef = np.empty((B, p, k))
    rank = np.empty(B, dtype=np.int64)
    rdiag = np.empty((B, p))
    for lo in range(0, B, chunk):
        hi = min(B, lo + chunk)
        c, r, d = _solve_chunk(A[a_index[lo:hi]], w[lo:hi], rhs[lo:hi], rank_tol)
        coef[lo:hi], rank[lo:hi], rdiag[lo:hi] = c, r, d
    return coef, rank, rdiag


def _solve_chunk(A, w, rhs, rank_tol):
    B, n, p = A.shape
    M = A * w[:, :, None]
    b = rhs * w[:, :, None]
    norms = np.sqrt(np.einsum("bij,bij->bj", M, M))
    scale = np.where(norms > 0.0, 1.0 / np.where(norms > 0.0, norms, 1.0), 1.0)
    M *= scale[:, None, :]

    perm = np.tile(np.arange(p), (B, 1))
    rows = np.arange(B)
    steps = min(n, p)
    rdiag = np.zeros((B, p))
    for j in range(steps):
        sub = M[:, j:, j:]
        cn = np.einsum("bij,bij->bj", sub, sub)
        piv = np.argmax(cn, axis=1) + j
        swap = piv != j
        if swap.any():
            r = rows[swap]
            pj = piv[swap]
            tmp = M[r, :, j].copy()
            M[r, :, j] = M[r, :, pj]
            M[r, :, pj] = tmp
            tp = perm[r, j].copy()
            perm[r, j] = perm[r, pj]
            perm[r, pj] = tp

        x = M[:, j:, j]
        xnorm = np.sqrt(np.einsum("bi,bi->b", x, x))
        alpha = np.where(x[:, 0] >= 0.0, -xnorm, xnorm)
        v = x.copy()
        v[:, 0] -= alpha
        vv = np.einsum("bi,bi->b", v, v)
        tau = np.where(vv > 0.0, 2.0 / np.where(vv > 0.0, vv, 1.0), 0.0)
        # apply H = I - tau v v^T to the trailing block and the right-hand side
        proj = np.einsum("bi,bij->bj", v, M[:, j:, j:]) * tau[:, None]
        M[:, j:, j:] -= v[:, :, None] * proj[:, None, :]
        projb = np.einsum("bi,bij->bj", v, b[:, j:, :]) * tau[:, None]
        b[:, j:, :] -= v[:, :, None] * projb[:, None, :]
        rdiag[:, j] = M[:, j, j]

    absd = np.abs(rdiag)
    ok = absd >= rank_tol * absd[:, :1]
    ok &= absd > 0.0
    ok[:, steps:] = False
    # rank = length of the leading run of accepted diagonals
    rank = np.where(ok.all(axis=1), p, np.argmin(ok, axis=1))

    y = np.zeros((B, p, b.shape[2]))
    for j in range(steps - 1, -1, -1):
        active = j < rank
        if not active.any():
            continue
        acc = b[:, j, :] - np.einsum("bi,bik->bk", M[:, j, j + 1 :], y[:, j + 1 :, :])
        diag = np.where(active, M[:, j, j], 1.0)
        y[:, j, :] = np.where(active[:, None], acc / diag[:, None], 0.0)

    d = np.zeros_like(y)
    np.put_along_axis(d, perm[:, :, None], y, axis=1)
    return d * scale[:, :, None], rank, rdiag
