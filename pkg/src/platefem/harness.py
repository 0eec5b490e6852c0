"""Convergence studies, cross-scheme comparison, and report serialization.

Levels are generated by uniform red refinement of a starting mesh; the
experimental order of convergence between consecutive levels is
log2(e_k / e_{k+1}) since the mesh size halves exactly.  Runs are fully
deterministic: identical configurations produce bit-identical CSV.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .fespace import (
    DiscreteFunction,
    SpaceTag,
    build_dof_map,
    local_lagrange_coeffs,
    prolongate_to_refined,
    to_dgp2,
)
from .forms import SchemeConfig, SchemeTag, assemble_apw, jump_seminorm
from .functions import ScalarFunction, get_manufactured
from .interp import morley_interp_avg
from .mesh import Triangulation, refine_uniform, unit_square_mesh
from .rhs import LoadSpec
from .solve import (
    ErrorReport,
    SolverError,
    broken_error_norms,
    compute_errors,
    solve_scheme,
)

CSV_COLUMNS = [
    "level", "hmax", "ndof", "energy_pw", "jump", "norm_h", "norm_scheme",
    "l2", "h1_pw", "h1_star", "best_approx", "eoc_energy", "eoc_h1",
]

EOC_FLOOR = 1e-13  # EOC undefined when either error is below this


@dataclass
class LevelRecord:
    level: int
    h_max: float
    n_dof: int
    errors: ErrorReport | None
    assembly_time: float
    solve_time: float
    extra: dict = field(default_factory=dict)


@dataclass
class ConvergenceReport:
    scheme: str
    levels: list
    eoc_energy: list       # per consecutive pair; None when undefined
    eoc_h1: list
    comparison: dict | None = None
    aborted: str | None = None   # solver failure message; levels are partial

    def csv_rows(self):
        rows = []
        for k, rec in enumerate(self.levels):
            e = rec.errors
            eoc_e = self.eoc_energy[k - 1] if k > 0 else None
            eoc_1 = self.eoc_h1[k - 1] if k > 0 else None
            rows.append([
                rec.level, rec.h_max, rec.n_dof,
                e.energy_pw if e else "", e.jump if e else "",
                e.norm_h if e else "", e.norm_scheme if e else "",
                e.l2 if e else "", e.h1_pw if e else "",
                e.h1_star if e else "", e.best_approx if e else "",
                "" if eoc_e is None else eoc_e,
                "" if eoc_1 is None else eoc_1,
            ])
        return rows

    def to_csv(self):
        lines = [",".join(CSV_COLUMNS)]
        for row in self.csv_rows():
            lines.append(",".join(_csv_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_json_dict(self):
        out = {
            "scheme": self.scheme,
            "levels": [
                {
                    "level": r.level, "hmax": r.h_max, "ndof": r.n_dof,
                    "errors": r.errors.as_dict() if r.errors else None,
                    "assembly_time": r.assembly_time, "solve_time": r.solve_time,
                    **({"extra": r.extra} if r.extra else {}),
                }
                for r in self.levels
            ],
            "eoc_energy": self.eoc_energy,
            "eoc_h1": self.eoc_h1,
        }
        if self.aborted is not None:
            out["aborted"] = self.aborted
        if self.comparison is not None:
            out["comparison"] = self.comparison
        return out


def _csv_cell(v):
    if v == "" or v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


def _eoc(errors):
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a is None or b is None or a <= EOC_FLOOR or b <= EOC_FLOOR:
            out.append(None)
        else:
            out.append(float(np.log2(a / b)))
    return out


def mesh_sequence(n0: int, levels: int):
    meshes = [unit_square_mesh(n0)]
    for _ in range(levels - 1):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one convergence/comparison study."""

    scheme: SchemeConfig = SchemeConfig()
    n0: int = 4
    levels: int = 4
    solution: str | None = "u1"   # manufactured solution name, or None
    load: LoadSpec | None = None  # explicit load (required when solution is None)
    quad_order: int = 7

    def __post_init__(self):
        if not 2 <= self.levels <= 8:
            raise ValueError("level count must be between 2 and 8")
        if self.solution is None and self.load is None:
            raise ValueError("either a manufactured solution or a load is required")

    def exact(self) -> ScalarFunction | None:
        return get_manufactured(self.solution) if self.solution else None

    def load_spec(self) -> LoadSpec:
        if self.load is not None:
            return self.load
        return LoadSpec(density=self.exact().biharmonic)


def _interp_energy(u: ScalarFunction, mesh: Triangulation, quad_order: int,
                   weight_h=False):
    """Broken energy seminorm of u - I_M u (optionally of h_T-weighted I_M u)."""
    v_m = morley_interp_avg(u, mesh)
    if not weight_h:
        _, _, energy = broken_error_norms(u, v_m, quad_order)
        return float(energy)
    # ||| h_T I_M u |||_pw with the cellwise constant Hessian of I_M u
    from .fespace import p2_hessians

    lag = local_lagrange_coeffs(v_m)
    H = np.einsum("taij,ta->tij", p2_hessians(mesh), lag)
    return float(np.sqrt(np.sum(
        mesh.tri_area * mesh.tri_diam ** 2 * np.einsum("tij,tij->t", H, H)
    )))


def run_convergence(config: StudyConfig) -> ConvergenceReport:
    """Solve the configured scheme on a refinement sequence and tabulate."""
    u = config.exact()
    load = config.load_spec()
    meshes = mesh_sequence(config.n0, config.levels)
    records = []
    aborted = None
    for k, mesh in enumerate(meshes):
        t0 = time.perf_counter()
        try:
            sol = solve_scheme(mesh, config.scheme, load)
        except SolverError as exc:
            aborted = f"level {k}: {exc}"
            break
        errors = compute_errors(u, sol, config.quad_order) if u is not None else None
        records.append(LevelRecord(
            level=k, h_max=mesh.h_max, n_dof=sol.u_h.space.n_free,
            errors=errors,
            assembly_time=sol.stats.get("assembly_time", 0.0),
            solve_time=sol.stats.get("solve_time", time.perf_counter() - t0),
        ))
    energies = [_energy_for(config.scheme.scheme, r.errors) for r in records]
    h1s = [r.errors.h1_star if r.errors else None for r in records]
    return ConvergenceReport(
        scheme=config.scheme.scheme.value,
        levels=records,
        eoc_energy=_eoc(energies),
        eoc_h1=_eoc(h1s),
        aborted=aborted,
    )


def _energy_for(scheme: SchemeTag, errors: ErrorReport | None):
    if errors is None:
        return None
    return errors.norm_scheme if scheme is SchemeTag.WOPSIP else errors.norm_h


def run_wopsip(config: StudyConfig) -> ConvergenceReport:
    """Convergence study for the over-penalized scheme.

    Additionally tracks the h_T-weighted energy of the nonconforming
    interpolant, the extra term in the scheme's a priori bound, and the
    penalty energy of the discrete solution per level.
    """
    cfg = StudyConfig(
        scheme=SchemeConfig(
            scheme=SchemeTag.WOPSIP,
            theta=config.scheme.theta,
            sigma1=config.scheme.sigma1, sigma2=config.scheme.sigma2,
            sigma_ip=config.scheme.sigma_ip, quad_order=config.scheme.quad_order,
        ),
        n0=config.n0, levels=config.levels,
        solution=config.solution, load=config.load, quad_order=config.quad_order,
    )
    u = cfg.exact()
    load = cfg.load_spec()
    meshes = mesh_sequence(cfg.n0, cfg.levels)
    records = []
    from .forms import penalty_value

    aborted = None
    for k, mesh in enumerate(meshes):
        try:
            sol = solve_scheme(mesh, cfg.scheme, load)
        except SolverError as exc:
            aborted = f"level {k}: {exc}"
            break
        errors = compute_errors(u, sol, cfg.quad_order) if u is not None else None
        extra = {"penalty_energy": penalty_value(sol.u_h, cfg.scheme)}
        if u is not None:
            extra["weighted_interp_energy"] = _interp_energy(u, mesh, cfg.quad_order, True)
        records.append(LevelRecord(
            level=k, h_max=mesh.h_max, n_dof=sol.u_h.space.n_free,
            errors=errors,
            assembly_time=sol.stats.get("assembly_time", 0.0),
            solve_time=sol.stats.get("solve_time", 0.0),
            extra=extra,
        ))
    energies = [_energy_for(SchemeTag.WOPSIP, r.errors) for r in records]
    h1s = [r.errors.h1_star if r.errors else None for r in records]
    return ConvergenceReport("wopsip", records, _eoc(energies), _eoc(h1s),
                             aborted=aborted)


COMPARISON_SCHEMES = (SchemeTag.MORLEY, SchemeTag.DG, SchemeTag.C0IP)


def run_comparison(config: StudyConfig, extra_levels: int = 2) -> ConvergenceReport:
    """Per-level error equivalence across the three comparable schemes.

    With a manufactured solution, the four tracked quantities are the
    common-norm errors of the three schemes and the cellwise-constant
    Hessian distance (the best-approximation benchmark, computed once
    per level).  For pure point loads, where no closed-form solution
    exists, errors are measured against a surrogate: the nonconforming
    solution ``extra_levels`` refinements further down.
    """
    u = config.exact()
    load = config.load_spec()
    meshes = mesh_sequence(config.n0, config.levels + (0 if u else extra_levels))
    study_meshes = meshes[: config.levels]
    solutions = {}
    for tag in COMPARISON_SCHEMES:
        cfg = SchemeConfig(
            scheme=tag, theta=config.scheme.theta,
            sigma1=config.scheme.sigma1, sigma2=config.scheme.sigma2,
            sigma_ip=config.scheme.sigma_ip, quad_order=config.scheme.quad_order,
        )
        solutions[tag] = [solve_scheme(m, cfg, load) for m in study_meshes]

    per_level = []
    records = []
    if u is not None:
        for k, mesh in enumerate(study_meshes):
            best = None
            row = {}
            for tag in COMPARISON_SCHEMES:
                rep = compute_errors(u, solutions[tag][k], config.quad_order)
                row[tag.value] = rep.norm_h
                if best is None:
                    best = rep.best_approx
                    records.append(LevelRecord(
                        level=k, h_max=mesh.h_max,
                        n_dof=solutions[SchemeTag.MORLEY][k].u_h.space.n_free,
                        errors=rep,
                        assembly_time=solutions[tag][k].stats.get("assembly_time", 0.0),
                        solve_time=solutions[tag][k].stats.get("solve_time", 0.0),
                    ))
            row["best_approx"] = best
            per_level.append(row)
    else:
        reference = solve_scheme(
            meshes[-1],
            SchemeConfig(scheme=SchemeTag.MORLEY, quad_order=config.scheme.quad_order),
            load,
        )
        for k, mesh in enumerate(study_meshes):
            row = {}
            for tag in COMPARISON_SCHEMES:
                row[tag.value] = reference_error_norm_h(
                    solutions[tag][k].u_h, meshes[k:], reference.u_h
                )
            per_level.append(row)
            records.append(LevelRecord(
                level=k, h_max=mesh.h_max,
                n_dof=solutions[SchemeTag.MORLEY][k].u_h.space.n_free,
                errors=None,
                assembly_time=0.0, solve_time=0.0,
                extra={"surrogate_errors": dict(row)},
            ))

    quantities = list(per_level[0])
    ratios = []
    for row in per_level:
        vals = [row[q] for q in quantities]
        ratios.append(max(vals) / min(vals))
    comparison = {
        "quantities": quantities,
        "per_level": per_level,
        "max_min_ratio": ratios,
        "ratio_drift": [
            abs(b - a) / a for a, b in zip(ratios[:-1], ratios[1:])
        ],
    }
    energies = [r.errors.norm_h if r.errors else None for r in records]
    h1s = [r.errors.h1_star if r.errors else None for r in records]
    return ConvergenceReport(
        "comparison", records, _eoc(energies), _eoc(h1s), comparison=comparison
    )


def reference_error_norm_h(u_h: DiscreteFunction, chain, u_ref: DiscreteFunction) -> float:
    """Common-norm distance of u_h to a reference on a finer mesh.

    ``chain`` is the refinement chain from u_h's mesh (first entry) to
    the reference mesh (last entry); both functions are re-expanded as
    discontinuous quadratics on the fine mesh, where the broken energy
    and the jump functional are evaluated exactly.
    """
    fine = chain[-1]
    f = u_h
    for mesh in chain[1:]:
        f = prolongate_to_refined(f, mesh)
    fine_dg = build_dof_map(fine, SpaceTag.DG_P2)
    ref = to_dgp2(u_ref, fine_dg)
    diff = DiscreteFunction(fine_dg, ref.coeffs - f.coeffs)
    key = "apw_dg"
    if key not in fine._cache:
        fine._cache[key] = assemble_apw(fine, fine_dg)
    energy2 = float(diff.coeffs @ fine._cache[key].matvec(diff.coeffs))
    return float(np.sqrt(energy2 + jump_seminorm(diff) ** 2))


def write_report(report: ConvergenceReport, csv_path=None, json_path=None):
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(report.to_csv())
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=2)
            fh.write("\n")
