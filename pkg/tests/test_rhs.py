import numpy as np
import pytest

from platefem.fespace import DiscreteFunction, SpaceTag, build_dof_map, evaluate
from platefem.functions import get_manufactured
from platefem.interp import smoother
from platefem.mesh import unit_square_mesh
from platefem.rhs import (
    LoadError,
    LoadSpec,
    locate_point,
    plain_load_vector,
    resolve_point_loads,
    smoothed_load_vector,
)

U1 = get_manufactured("u1")


def test_empty_load_gives_zero(mesh2):
    for tag in (SpaceTag.MORLEY, SpaceTag.DG_P2, SpaceTag.LAGRANGE_P2):
        dm = build_dof_map(mesh2, tag)
        assert np.all(smoothed_load_vector(mesh2, dm, LoadSpec()) == 0.0)
        assert np.all(plain_load_vector(mesh2, dm, LoadSpec()) == 0.0)


def test_point_load_at_interior_vertex_is_nodal_shortcut():
    mesh = unit_square_mesh(8)
    dm = build_dof_map(mesh, SpaceTag.MORLEY)
    load = LoadSpec(points=((1.0, (0.5, 0.5)),))
    b = smoothed_load_vector(mesh, dm, load)
    center = int(np.flatnonzero(
        (np.abs(mesh.vertices[:, 0] - 0.5) < 1e-14)
        & (np.abs(mesh.vertices[:, 1] - 0.5) < 1e-14)
    )[0])
    dof = dm.vertex_dofs[center]
    expected = np.zeros(dm.n_free)
    expected[dof] = 1.0
    assert np.array_equal(b, expected)  # bit-exact nodal shortcut


def test_point_load_snap_tolerance(mesh2):
    eps = 1e-13  # within the snap tolerance of a vertex
    load = LoadSpec(points=((2.0, (0.5 + eps, 0.5)),))
    resolved = resolve_point_loads(mesh2, load)
    assert resolved[0].snapped
    assert resolved[0].weight == 2.0


def test_point_load_general_evaluation_oracle(mesh2, rng):
    # non-vertex load: component i equals the smoothed basis function at the
    # load point, recomputed by direct evaluation
    a = (0.3, 0.45)
    dg = build_dof_map(mesh2, SpaceTag.DG_P2)
    b = smoothed_load_vector(mesh2, dg, LoadSpec(points=((1.0, a),)))
    t, lam = locate_point(mesh2, np.array(a))
    for i in rng.choice(dg.n_free, size=12, replace=False):
        e = np.zeros(dg.n_free)
        e[i] = 1.0
        val = evaluate(smoother(DiscreteFunction(dg, e)), t, lam, 0)
        assert abs(b[i] - val) < 1e-12


def test_point_load_outside_domain_rejected(mesh2):
    with pytest.raises(LoadError, match="outside"):
        smoothed_load_vector(mesh2, build_dof_map(mesh2, SpaceTag.MORLEY),
                             LoadSpec(points=((1.0, (1.5, 0.5)),)))


def test_plain_rejects_point_loads(mesh2):
    dm = build_dof_map(mesh2, SpaceTag.DG_P2)
    with pytest.raises(LoadError, match="L2"):
        plain_load_vector(mesh2, dm, LoadSpec(points=((1.0, (0.5, 0.5)),)))


def test_plain_partition_of_unity(mesh2):
    dg = build_dof_map(mesh2, SpaceTag.DG_P2)
    b = plain_load_vector(mesh2, dg, LoadSpec(density=lambda x, y: np.ones_like(x),
                                              density_degree=0))
    per_tri = b.reshape(-1, 6).sum(axis=1)
    assert np.abs(per_tri - mesh2.tri_area).max() < 1e-15


def test_plain_high_order_oracle():
    # the biharmonic load of u1 oscillates at the (2 pi)^4 scale; an
    # independent higher-order rule confirms the vector to 1e-9 relative
    # once the primary rule resolves it (order 11 on the n=8 grid)
    mesh = unit_square_mesh(8)
    dg = build_dof_map(mesh, SpaceTag.DG_P2)
    load = LoadSpec(density=U1.biharmonic)
    b_primary = plain_load_vector(mesh, dg, load, quad_order=11)
    b_oracle = plain_load_vector(mesh, dg, load, quad_order=13)
    scale = np.abs(b_oracle).max()
    assert np.abs(b_primary - b_oracle).max() < 1e-9 * scale


def test_quadrature_order_validation(mesh2):
    dm = build_dof_map(mesh2, SpaceTag.MORLEY)
    load = LoadSpec(density=lambda x, y: np.ones_like(x))
    with pytest.raises(LoadError, match="order"):
        smoothed_load_vector(mesh2, dm, load, quad_order=2)
    with pytest.raises(LoadError, match="order"):
        plain_load_vector(mesh2, dm, load, quad_order=2)


def test_linearity(mesh2):
    dm = build_dof_map(mesh2, SpaceTag.MORLEY)
    l1 = LoadSpec(density=U1.biharmonic)
    l2 = LoadSpec(density=lambda x, y: x * y, points=((0.7, (0.3, 0.4)),))
    combined = LoadSpec(
        density=lambda x, y: 2.0 * U1.biharmonic(x, y) + x * y,
        points=((0.7, (0.3, 0.4)),),
    )
    b = smoothed_load_vector(mesh2, dm, combined, quad_order=9)
    b1 = smoothed_load_vector(mesh2, dm, l1, quad_order=9)
    b2 = smoothed_load_vector(mesh2, dm, l2, quad_order=9)
    assert np.abs(b - (2.0 * b1 + b2)).max() < 1e-12 * max(1.0, np.abs(b).max())


def test_smoothed_on_macro_space_rejected(mesh2):
    hct = build_dof_map(mesh2, SpaceTag.HCT)
    with pytest.raises(ValueError, match="trial space"):
        smoothed_load_vector(mesh2, hct, LoadSpec(density=lambda x, y: x))
