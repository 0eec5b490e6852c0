"""Quadratic nonstandard finite element solvers for clamped plate bending.

Four discretizations of the fourth-order clamped plate problem on
triangles - the nonconforming (Morley) scheme, symmetric/nonsymmetric
interior-penalty discontinuous Galerkin, the C0 interior penalty
method, and the weakly over-penalized symmetric interior penalty
scheme - share one modified right-hand side: the load functional is
applied to a C^1 (HCT macro element) companion of the averaged
nonconforming interpolation of the discrete test function, so loads
that are merely in H^-2 (e.g. point forces) are admissible in every
scheme.
"""

from .fespace import DiscreteFunction, DofMap, SpaceTag, build_dof_map, evaluate
from .forms import SchemeConfig, SchemeTag, assemble_scheme
from .functions import MANUFACTURED, ScalarFunction, get_manufactured
from .harness import StudyConfig, run_comparison, run_convergence, run_wopsip
from .interp import (
    InterpolationReport,
    companion,
    morley_interp_avg,
    morley_interp_local,
    smoother,
    transfer_ic,
    verify_right_inverse,
)
from .mesh import Triangulation, read_mesh, refine_uniform, unit_square_mesh, write_mesh
from .rhs import LoadSpec, plain_load_vector, smoothed_load_vector
from .solve import (
    ErrorReport,
    NonCoerciveError,
    Solution,
    SolverError,
    compute_errors,
    pi0_hessian_deviation,
    solve,
    solve_scheme,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteFunction", "DofMap", "SpaceTag", "build_dof_map", "evaluate",
    "SchemeConfig", "SchemeTag", "assemble_scheme",
    "MANUFACTURED", "ScalarFunction", "get_manufactured",
    "StudyConfig", "run_comparison", "run_convergence", "run_wopsip",
    "InterpolationReport", "companion", "morley_interp_avg", "morley_interp_local",
    "smoother", "transfer_ic", "verify_right_inverse",
    "Triangulation", "read_mesh", "refine_uniform", "unit_square_mesh", "write_mesh",
    "LoadSpec", "plain_load_vector", "smoothed_load_vector",
    "ErrorReport", "NonCoerciveError", "Solution", "SolverError",
    "compute_errors", "pi0_hessian_deviation", "solve", "solve_scheme",
]
