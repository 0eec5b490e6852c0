"""Benchmark the accelerated kernels against their fallback paths.

Compares, on one interior-penalty system:

* sparse LDL^T numeric factorization: numba vs pure Python,
* CSR matrix-vector product: numba vs pure Python vs vectorized numpy,
* Jacobi-CG solve: numba kernel vs vectorized numpy loop.

Run with ``python benchmarks/kernel_bench.py [n]`` (grid parameter n,
default 12).  ``PLATEFEM_PURE_NUMPY=1`` disables compilation entirely, in
which case both columns time the same pure path.
"""

import sys
import time

import numpy as np

from platefem import kernels
from platefem.accel import USE_NUMBA
from platefem.forms import SchemeConfig, SchemeTag, assemble_scheme
from platefem.mesh import unit_square_mesh
from platefem.rhs import LoadSpec, smoothed_load_vector
from platefem.solve import _cg_jacobi_numpy, rcm_ordering


def best_of(fn, repeats=3):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(n=12):
    mesh = unit_square_mesh(n)
    cfg = SchemeConfig(scheme=SchemeTag.DG)
    A, dofmap = assemble_scheme(mesh, cfg)
    from platefem.functions import get_manufactured

    b = smoothed_load_vector(mesh, dofmap, LoadSpec(density=get_manufactured("u1").biharmonic))
    print(f"system: interior-penalty scheme on a {n}x{n} grid, "
          f"{A.nrows} unknowns, {A.nnz} nonzeros, numba={'on' if USE_NUMBA else 'off'}")

    # permuted upper-triangle CSC input for the factorization
    perm = rcm_ordering(A)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    rp, cp = inv[A.rows], inv[A.cols]
    keep = rp <= cp
    r, c, v = rp[keep], cp[keep], A.vals[keep]
    order = np.lexsort((r, c))
    r, c, v = r[order], c[order], v[order]
    Ap = np.zeros(A.nrows + 1, dtype=np.int64)
    np.add.at(Ap, c + 1, 1)
    np.cumsum(Ap, out=Ap)
    parent, Lnz = kernels.ldlt_symbolic(A.nrows, Ap, r)
    Lp = np.zeros(A.nrows + 1, dtype=np.int64)
    np.cumsum(Lnz, out=Lp[1:])

    kernels.ldlt_numeric(A.nrows, Ap, r, v, parent, Lp)  # compile before timing
    t_jit = best_of(lambda: kernels.ldlt_numeric(A.nrows, Ap, r, v, parent, Lp))
    t_py = best_of(lambda: kernels.ldlt_numeric.py_func(A.nrows, Ap, r, v, parent, Lp), 1)
    rows = [("ldlt numeric factorization", t_jit, t_py, None)]

    indptr, indices, data = A.to_csr()
    x = np.linspace(0.0, 1.0, A.nrows)
    out = np.zeros(A.nrows)
    kernels.csr_matvec(indptr, indices, data, x, out)
    t_jit = best_of(lambda: kernels.csr_matvec(indptr, indices, data, x, out), 10)
    t_py = best_of(lambda: kernels.csr_matvec.py_func(indptr, indices, data, x, out), 1)
    t_np = best_of(lambda: A.matvec(x), 10)
    rows.append(("csr matvec", t_jit, t_py, t_np))

    diag = A.diagonal()
    kernels.cg_jacobi(indptr, indices, data, diag, b, 1e-8, 200)
    t_jit = best_of(lambda: kernels.cg_jacobi(indptr, indices, data, diag, b, 1e-8, 200), 3)
    t_np = best_of(lambda: _cg_jacobi_numpy(A, diag, b, 1e-8, 200), 3)
    rows.append(("jacobi-cg (200 iterations cap)", t_jit, None, t_np))

    def cell(t):
        return f"{t * 1e3:9.2f}ms" if t is not None else f"{'-':>11s}"

    print(f"\n{'kernel':35s} {'numba':>11s} {'python':>11s} {'numpy':>11s} {'speedup':>9s}")
    for name, jit, py, np_t in rows:
        base = py if py is not None else np_t
        speed = base / jit if jit > 0 else float("inf")
        print(f"{name:35s} {cell(jit)} {cell(py)} {cell(np_t)} {speed:8.1f}x")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 12)
