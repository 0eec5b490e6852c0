"""Linear solves, post-processing and error norms.

The direct path is an in-repo sparse LDL^T (up-looking, elimination-tree
based) on a reverse Cuthill-McKee ordering, with the numeric kernels
compiled by numba.  A nonpositive pivot on a symmetric system raises
:class:`NonCoerciveError` - for the penalized schemes that is the
diagnostic that the stabilization parameter is too small.  Below
``DENSE_CAP`` unknowns a dense fallback is available (and is the default
in the pure-numpy mode); Jacobi-preconditioned conjugate gradients serve
as the iterative option for positive definite systems.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .accel import USE_NUMBA
from .fespace import (
    DiscreteFunction,
    barycentric_gradients,
    hct_local_basis,
    local_dof_values,
    local_lagrange_coeffs,
    monomial_gradients,
    monomial_hessians,
    monomial_values,
    p2_gradients,
    p2_hessians,
    p2_values,
)
from .forms import SchemeConfig, assemble_scheme, jump_seminorm, penalty_value
from .functions import ScalarFunction
from .interp import smoother
from .mesh import Triangulation
from .quadrature import triangle_rule
from .rhs import LoadSpec, smoothed_load_vector
from .sparse import SparseMatrix

DENSE_CAP = 2000
CG_RTOL = 1e-12


class SolverError(RuntimeError):
    pass


class NonCoerciveError(SolverError):
    """Symmetric system is not positive definite.

    For the interior-penalty schemes this indicates the stabilization
    parameters are below the coercivity threshold (they must be chosen
    'sufficiently large'); increase sigma and reassemble.
    """


def rcm_ordering(A: SparseMatrix) -> np.ndarray:
    """Reverse Cuthill-McKee ordering of the symmetric sparsity pattern."""
    n = A.nrows
    off = A.rows != A.cols
    r = np.concatenate([A.rows[off], A.cols[off]])
    c = np.concatenate([A.cols[off], A.rows[off]])
    order = np.lexsort((c, r))
    r, c = r[order], c[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    np.cumsum(indptr, out=indptr)
    degree = np.diff(indptr)
    visited = np.zeros(n, dtype=bool)
    result = np.empty(n, dtype=np.int64)
    pos = 0
    while pos < n:
        unvisited = np.flatnonzero(~visited)
        start = unvisited[np.argmin(degree[unvisited])]
        visited[start] = True
        result[pos] = start
        head = pos
        pos += 1
        while head < pos:
            u = result[head]
            head += 1
            nbr = c[indptr[u]:indptr[u + 1]]
            nbr = nbr[~visited[nbr]]
            if nbr.size:
                nbr = np.unique(nbr)
                nbr = nbr[np.argsort(degree[nbr], kind="stable")]
                visited[nbr] = True
                result[pos:pos + nbr.size] = nbr
                pos += nbr.size
    return result[::-1].copy()


@dataclass
class LdltFactor:
    perm: np.ndarray
    inv_perm: np.ndarray
    Lp: np.ndarray
    Li: np.ndarray
    Lx: np.ndarray
    D: np.ndarray

    @property
    def min_pivot(self):
        return float(self.D.min())

    def solve(self, b):
        x = kernels.ldlt_solve(self.D.size, self.Lp, self.Li, self.Lx, self.D, b[self.perm])
        out = np.empty_like(x)
        out[self.perm] = x
        return out


def ldlt_factor(A: SparseMatrix) -> LdltFactor:
    """Factor a symmetric positive definite matrix as L D L^T."""
    n = A.nrows
    perm = rcm_ordering(A)
    inv = np.empty(n, dtype=np.int64)
    inv[perm] = np.arange(n)
    rp, cp = inv[A.rows], inv[A.cols]
    keep = rp <= cp
    r, c, v = rp[keep], cp[keep], A.vals[keep]
    order = np.lexsort((r, c))
    r, c, v = r[order], c[order], v[order]
    Ap = np.zeros(n + 1, dtype=np.int64)
    np.add.at(Ap, c + 1, 1)
    np.cumsum(Ap, out=Ap)
    parent, Lnz = kernels.ldlt_symbolic(n, Ap, r)
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(Lnz, out=Lp[1:])
    Li, Lx, D, bad = kernels.ldlt_numeric(n, Ap, r, v, parent, Lp)
    if bad >= 0:
        raise NonCoerciveError(
            f"nonpositive pivot {D[bad]:.3e} at elimination step {bad}: the system "
            "is not coercive with the given penalty parameters (increase sigma)"
        )
    return LdltFactor(perm, inv, Lp, Li, Lx, D)


def _dense_spd_solve(A: SparseMatrix, b):
    dense = A.to_dense()
    try:
        np.linalg.cholesky(dense)
    except np.linalg.LinAlgError:
        raise NonCoerciveError(
            "dense factorization found the symmetric system indefinite: "
            "not coercive with the given penalty parameters (increase sigma)"
        ) from None
    return np.linalg.solve(dense, b)


def solve(matrix: SparseMatrix, vector: np.ndarray, symmetric: bool,
          method: str = "auto", rtol: float = CG_RTOL):
    """Solve the linear system; returns (coefficients, stats dict).

    methods: 'ldlt' (sparse direct, symmetric), 'cg' (Jacobi-CG, SPD),
    'dense' (LU/Cholesky below DENSE_CAP), 'auto'.  Symmetric systems
    that fail positive-definiteness raise NonCoerciveError.
    """
    b = np.asarray(vector, dtype=np.float64)
    n = matrix.nrows
    if matrix.ncols != n or b.shape != (n,):
        raise ValueError("matrix/vector dimensions do not agree")
    if n == 0:
        return np.zeros(0), {"method": "empty", "residual": 0.0}
    t0 = time.perf_counter()
    stats = {"n": n, "nnz": matrix.nnz}
    if method == "auto":
        if not symmetric:
            method = "dense"
        elif USE_NUMBA:
            method = "ldlt"
        else:
            method = "dense" if n <= DENSE_CAP else "cg"
    if method == "dense":
        if n > DENSE_CAP:
            raise SolverError(
                f"dense fallback limited to {DENSE_CAP} unknowns (system has {n}); "
                "symmetric systems use the sparse LDL^T or CG paths"
            )
        if symmetric:
            x = _dense_spd_solve(matrix, b)
            stats["method"] = "dense-cholesky"
        else:
            x = np.linalg.solve(matrix.to_dense(), b)
            stats["method"] = "dense-lu"
    elif method == "ldlt":
        if not symmetric:
            raise SolverError("LDL^T requires a symmetric system")
        factor = ldlt_factor(matrix)
        x = factor.solve(b)
        # mixed-precision iterative refinement: the penalty terms scale like
        # h^-4, and residuals of the badly scaled system evaluated in double
        # precision drown in cancellation noise
        bnorm = np.linalg.norm(b)
        r = _residual_extended(matrix, x, b)
        rnorm = np.linalg.norm(r.astype(np.float64))
        for _ in range(3):
            if rnorm <= 1e-13 * (bnorm if bnorm > 0 else 1.0):
                break
            x_new = x + factor.solve(r.astype(np.float64))
            r_new = _residual_extended(matrix, x_new, b)
            rnorm_new = np.linalg.norm(r_new.astype(np.float64))
            if rnorm_new >= 0.5 * rnorm:
                if rnorm_new < rnorm:
                    x, r, rnorm = x_new, r_new, rnorm_new
                break  # stalled at the double-precision representation floor
            x, r, rnorm = x_new, r_new, rnorm_new
        stats["method"] = "ldlt"
        stats["min_pivot"] = factor.min_pivot
        stats["factor_nnz"] = int(factor.Lp[-1])
    elif method == "cg":
        if not symmetric:
            raise SolverError("CG requires a symmetric positive definite system")
        diag = matrix.diagonal()
        if np.any(diag <= 0):
            raise NonCoerciveError("nonpositive diagonal entry: system cannot be SPD")
        if USE_NUMBA:
            indptr, indices, data = matrix.to_csr()
            x, iters, relres, flag = kernels.cg_jacobi(indptr, indices, data, diag, b,
                                                       rtol, 20 * n + 100)
        else:
            x, iters, relres, flag = _cg_jacobi_numpy(matrix, diag, b, rtol, 20 * n + 100)
        if flag == 2:
            raise NonCoerciveError(
                "conjugate gradients found a direction of nonpositive curvature: "
                "the system is not coercive with the given penalty parameters"
            )
        if flag == 1:
            raise SolverError(f"CG did not converge in {iters} iterations (relres {relres:.3e})")
        stats["method"] = "cg"
        stats["iterations"] = int(iters)
    else:
        raise ValueError(f"unknown method {method!r}")
    bnorm = np.linalg.norm(b)
    r = _residual_extended(matrix, x, b).astype(np.float64)
    residual = np.linalg.norm(r) / (bnorm if bnorm > 0 else 1.0)
    # componentwise backward error: ~machine epsilon means x is as good as a
    # double precision representation of the solution can be, even when the
    # raw residual ratio above is limited by the h^-4 penalty scaling
    scale = np.abs(matrix.vals)
    axabs = np.zeros(n)
    np.add.at(axabs, matrix.rows, scale * np.abs(x[matrix.cols]))
    denom = (axabs + np.abs(b)).max()
    stats["residual"] = float(residual)
    stats["backward_error"] = float(np.abs(r).max() / denom) if denom > 0 else 0.0
    stats["converged"] = bool(residual <= 1e-10)
    stats["solve_time"] = time.perf_counter() - t0
    return x, stats


def _residual_extended(matrix: SparseMatrix, x, b):
    """b - A x accumulated in extended precision."""
    r = b.astype(np.longdouble).copy()
    np.subtract.at(r, matrix.rows,
                   matrix.vals.astype(np.longdouble) * x.astype(np.longdouble)[matrix.cols])
    return r


def _cg_jacobi_numpy(matrix, diag, b, rtol, maxiter):
    """Vectorized Jacobi-CG for the pure-numpy acceleration mode."""
    n = b.size
    x = np.zeros(n)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0, 0.0, 0
    z = r / diag
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = matrix.matvec(p)
        pAp = p @ Ap
        if pAp <= 0.0:
            return x, it, np.linalg.norm(r) / bnorm, 2
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        relres = np.linalg.norm(r) / bnorm
        if relres <= rtol:
            return x, it, relres, 0
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, np.linalg.norm(r) / bnorm, 1


# ---------------------------------------------------------------------------
# scheme-level driver
# ---------------------------------------------------------------------------

@dataclass
class Solution:
    config: SchemeConfig
    u_h: DiscreteFunction
    u_star: DiscreteFunction       # C^1 post-processing of u_h
    stats: dict = field(default_factory=dict)

    @property
    def scheme(self):
        return self.config.scheme


def solve_scheme(mesh: Triangulation, config: SchemeConfig, load: LoadSpec,
                 method: str = "auto") -> Solution:
    """Assemble and solve one scheme with the smoothed right-hand side."""
    t0 = time.perf_counter()
    A, dofmap = assemble_scheme(mesh, config)
    b = smoothed_load_vector(mesh, dofmap, load, quad_order=config.quad_order)
    assembly_time = time.perf_counter() - t0
    x, stats = solve(A, b, symmetric=config.symmetric, method=method)
    u_h = DiscreteFunction(dofmap, x)
    u_star = smoother(u_h)
    stats["assembly_time"] = assembly_time
    return Solution(config, u_h, u_star, stats)


# ---------------------------------------------------------------------------
# error norms
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    energy_pw: float      # broken H^2 seminorm of u - u_h
    jump: float           # j_h of the error (vertex jumps + edge-mean slopes)
    norm_h: float         # sqrt(energy_pw^2 + jump^2)
    norm_scheme: float    # scheme norm: energy + its own penalty
    l2: float
    h1_pw: float          # broken H^1 seminorm of u - u_h
    h1_star: float        # H^1 norm of u - u_star (C^1 post-processing)
    best_approx: float    # L^2 distance of D^2 u from cellwise constants
    quad_order: int

    def as_dict(self):
        return {
            "energy_pw": self.energy_pw, "jump": self.jump, "norm_h": self.norm_h,
            "norm_scheme": self.norm_scheme, "l2": self.l2, "h1_pw": self.h1_pw,
            "h1_star": self.h1_star, "best_approx": self.best_approx,
            "quad_order": self.quad_order,
        }


def _exact_on_points(u: ScalarFunction, pts):
    vals = u.value(pts[..., 0], pts[..., 1])
    grads = u.grad(pts[..., 0], pts[..., 1])
    hess = u.hess(pts[..., 0], pts[..., 1])
    return vals, grads, hess


def broken_error_norms(u: ScalarFunction, f_h: DiscreteFunction, quad_order: int):
    """(L2, broken H1 seminorm, broken H2 seminorm) of u - f_h (P2 spaces)."""
    mesh = f_h.mesh
    bary, w = triangle_rule(quad_order)
    pts = np.einsum("qi,tij->tqj", bary, mesh.tri_coords())
    vals, grads, hess = _exact_on_points(u, pts)
    lag = local_lagrange_coeffs(f_h)
    N = p2_values(bary)
    vh = np.einsum("qa,ta->tq", N, lag)
    G = p2_gradients(bary, barycentric_gradients(mesh))
    gh = np.einsum("tqai,ta->tqi", G, lag)
    Hh = np.einsum("taij,ta->tij", p2_hessians(mesh), lag)
    area = mesh.tri_area
    l2 = np.einsum("t,q,tq->", area, w, (vals - vh) ** 2)
    h1 = np.einsum("t,q,tqi->", area, w, (grads - gh) ** 2)
    dh = hess - Hh[:, None, :, :]
    h2 = np.einsum("t,q,tqij->", area, w, dh ** 2)
    return np.sqrt(l2), np.sqrt(h1), np.sqrt(h2)


def hct_error_norms(u: ScalarFunction, f_star: DiscreteFunction, quad_order: int):
    """(L2, H1 seminorm, broken-H2-on-subtriangles seminorm) of u - f_star."""
    mesh = f_star.mesh
    basis = hct_local_basis(mesh)
    loc = np.einsum(
        "tsma,ta->tsm", basis.coeffs, local_dof_values(f_star)
    )  # (nt, 3, 10) polynomial per sub-triangle
    bary, w = triangle_rule(quad_order)
    third = mesh.tri_area / 3.0
    l2 = h1 = h2 = 0.0
    for s in range(3):
        pts = np.einsum("qi,tij->tqj", bary, basis.sub_coords[:, s])
        xi = (pts - basis.center[:, None, :]) / basis.scale[:, None, None]
        vals, grads, hess = _exact_on_points(u, pts)
        vh = np.einsum("tqm,tm->tq", monomial_values(xi), loc[:, s])
        gh = np.einsum("tqmi,tm->tqi", monomial_gradients(xi), loc[:, s])
        gh /= basis.scale[:, None, None]
        Hh = np.einsum("tqmij,tm->tqij", monomial_hessians(xi), loc[:, s])
        Hh /= basis.scale[:, None, None, None] ** 2
        l2 += np.einsum("t,q,tq->", third, w, (vals - vh) ** 2)
        h1 += np.einsum("t,q,tqi->", third, w, (grads - gh) ** 2)
        h2 += np.einsum("t,q,tqij->", third, w, (hess - Hh) ** 2)
    return np.sqrt(l2), np.sqrt(h1), np.sqrt(h2)


def energy_distance_p2_hct(f: DiscreteFunction, s: DiscreteFunction) -> float:
    """Broken H^2 distance between a quadratic-space function and a macro one.

    Exact: the quadratic has cellwise constant Hessians and the macro
    Hessian is linear per sub-triangle, so a degree-2 rule integrates
    the squared difference exactly.
    """
    mesh = f.mesh
    basis = hct_local_basis(mesh)
    lag = local_lagrange_coeffs(f)
    Hf = np.einsum("taij,ta->tij", p2_hessians(mesh), lag)
    loc = np.einsum("tsma,ta->tsm", basis.coeffs, local_dof_values(s))
    bary, w = triangle_rule(4)
    third = mesh.tri_area / 3.0
    total = 0.0
    for sub in range(3):
        pts = np.einsum("qi,tij->tqj", bary, basis.sub_coords[:, sub])
        xi = (pts - basis.center[:, None, :]) / basis.scale[:, None, None]
        Hs = np.einsum("tqmij,tm->tqij", monomial_hessians(xi), loc[:, sub])
        Hs /= basis.scale[:, None, None, None] ** 2
        diff = Hs - Hf[:, None, :, :]
        total += np.einsum("t,q,tqij->", third, w, diff ** 2)
    return float(np.sqrt(total))


def pi0_hessian_deviation(u: ScalarFunction, mesh: Triangulation,
                          quad_order: int = 7) -> float:
    """L^2 distance of D^2 u from its per-triangle integral means."""
    bary, w = triangle_rule(quad_order)
    pts = np.einsum("qi,tij->tqj", bary, mesh.tri_coords())
    hess = u.hess(pts[..., 0], pts[..., 1])
    mean = np.einsum("q,tqij->tij", w, hess)
    dev = hess - mean[:, None, :, :]
    sq = np.einsum("q,tqij->t", w, dev ** 2)
    return float(np.sqrt(np.sum(mesh.tri_area * sq)))


def compute_errors(u_exact: ScalarFunction, sol: Solution,
                   quad_order: int = 7) -> ErrorReport:
    """All error norms of a scheme solution against a clamped exact solution.

    The jump term of the error is evaluated from DOF/trace arithmetic of
    u_h alone, which is exact when u_exact satisfies the homogeneous
    clamped boundary conditions (the manufactured suite does).
    """
    if quad_order < 4:
        raise ValueError("error quadrature order below 4 is rejected")
    mesh = sol.u_h.mesh
    l2, h1, energy = broken_error_norms(u_exact, sol.u_h, quad_order)
    jump = jump_seminorm(sol.u_h)
    norm_h = float(np.hypot(energy, jump))
    pen = penalty_value(sol.u_h, sol.config)
    norm_scheme = float(np.sqrt(energy ** 2 + pen))
    l2s, h1s, _ = hct_error_norms(u_exact, sol.u_star, quad_order)
    h1_star = float(np.hypot(l2s, h1s))
    best = pi0_hessian_deviation(u_exact, mesh, quad_order)
    return ErrorReport(
        energy_pw=float(energy), jump=float(jump), norm_h=norm_h,
        norm_scheme=norm_scheme, l2=float(l2), h1_pw=float(h1),
        h1_star=h1_star, best_approx=best, quad_order=quad_order,
    )
