"""Hot numeric kernels: sparse LDL^T factorization, CSR matvec, CG.

These are the sequential inner loops that dominate solver runtime; they
are compiled with numba when available (see :mod:`platefem.accel`).
Every kernel keeps a ``py_func`` attribute with the uncompiled version
for the pure-numpy fallback path and for benchmarking.
"""

import numpy as np

from .accel import njit


@njit
def ldlt_symbolic(n, Ap, Ai):
    """Elimination tree and column counts for the upper-triangle CSC input.

    ``Ap``/``Ai`` hold the upper triangle (row indices <= column) of a
    symmetric matrix, column compressed.  Returns (parent, Lnz).
    """
    parent = np.full(n, -1, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    Lnz = np.zeros(n, dtype=np.int64)
    for k in range(n):
        flag[k] = k
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            while i < k and flag[i] != k:
                if parent[i] == -1:
                    parent[i] = k
                Lnz[i] += 1
                flag[i] = k
                i = parent[i]
    return parent, Lnz


@njit
def ldlt_numeric(n, Ap, Ai, Ax, parent, Lp):
    """Up-looking LDL^T numeric factorization.

    Returns (Li, Lx, D, bad) where ``bad`` is the index of the first
    nonpositive pivot, or -1 if the factorization is positive definite.
    L is unit lower triangular in CSC form given by (Lp, Li, Lx).
    """
    Li = np.zeros(Lp[n], dtype=np.int64)
    Lx = np.zeros(Lp[n])
    D = np.zeros(n)
    Y = np.zeros(n)
    pattern = np.zeros(n, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    Lnz = np.zeros(n, dtype=np.int64)
    for k in range(n):
        top = n
        flag[k] = k
        Y[k] = 0.0
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            Y[i] += Ax[p]
            length = 0
            while flag[i] != k:
                pattern[length] = i
                length += 1
                flag[i] = k
                i = parent[i]
            while length > 0:
                length -= 1
                top -= 1
                pattern[top] = pattern[length]
        D[k] = Y[k]
        Y[k] = 0.0
        for s in range(top, n):
            i = pattern[s]
            yi = Y[i]
            Y[i] = 0.0
            p2 = Lp[i] + Lnz[i]
            for p in range(Lp[i], p2):
                Y[Li[p]] -= Lx[p] * yi
            lki = yi / D[i]
            D[k] -= lki * yi
            Li[p2] = k
            Lx[p2] = lki
            Lnz[i] += 1
        if D[k] <= 0.0:
            return Li, Lx, D, k
    return Li, Lx, D, -1


@njit
def ldlt_solve(n, Lp, Li, Lx, D, b):
    """Solve L D L^T x = b in place of a copy of b."""
    x = b.copy()
    for j in range(n):
        xj = x[j]
        for p in range(Lp[j], Lp[j + 1]):
            x[Li[p]] -= Lx[p] * xj
    for j in range(n):
        x[j] /= D[j]
    for j in range(n - 1, -1, -1):
        s = x[j]
        for p in range(Lp[j], Lp[j + 1]):
            s -= Lx[p] * x[Li[p]]
        x[j] = s
    return x


@njit
def csr_matvec(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        s = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            s += data[p] * x[indices[p]]
        out[i] = s
    return out


@njit
def cg_jacobi(indptr, indices, data, diag, b, rtol, maxiter):
    """Jacobi-preconditioned conjugate gradients.

    Returns (x, iterations, relative_residual, status) with status 0 on
    convergence, 1 on iteration limit, 2 if the matrix is detected to be
    not positive definite (p^T A p <= 0).
    """
    n = b.shape[0]
    x = np.zeros(n)
    r = b.copy()
    z = r / diag
    p = z.copy()
    Ap = np.zeros(n)
    bnorm = np.sqrt(np.dot(b, b))
    if bnorm == 0.0:
        return x, 0, 0.0, 0
    rz = np.dot(r, z)
    it = 0
    while it < maxiter:
        csr_matvec(indptr, indices, data, p, Ap)
        pAp = np.dot(p, Ap)
        if pAp <= 0.0:
            return x, it, np.sqrt(np.dot(r, r)) / bnorm, 2
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        relres = np.sqrt(np.dot(r, r)) / bnorm
        if relres <= rtol:
            return x, it, relres, 0
        z = r / diag
        rz_new = np.dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return x, it, np.sqrt(np.dot(r, r)) / bnorm, 1
