import numpy as np
import pytest

from platefem.mesh import (
    MeshError,
    build_triangulation,
    read_mesh,
    refine_uniform,
    unit_square_mesh,
    write_mesh,
)


def canonical_signature(mesh):
    verts = np.sort(mesh.vertices.view([("x", float), ("y", float)]).ravel())
    areas = np.sort(mesh.tri_area)
    return verts, areas


def test_unit_square_counts():
    m = unit_square_mesh(1)
    assert (m.num_vertices, m.num_triangles, m.num_edges) == (4, 2, 5)
    m = unit_square_mesh(2)
    assert (m.num_vertices, m.num_triangles, m.num_edges) == (9, 8, 16)
    assert m.num_vertices - m.num_edges + m.num_triangles == 1
    m = unit_square_mesh(4)
    assert m.num_triangles == 32
    assert m.h_max == np.sqrt(2.0) / 4.0


def test_area_sum_and_orientation():
    for n in (1, 3, 5):
        m = unit_square_mesh(n)
        assert abs(m.tri_area.sum() - 1.0) < 1e-12
        assert np.all(m.tri_area > 0)


def test_edge_adjacency_and_normals():
    m = unit_square_mesh(3)
    interior = ~m.edge_is_boundary
    assert np.all(m.edge_tris[interior, 1] >= 0)
    assert np.all(m.edge_tris[~interior, 1] == -1)
    # T+ has the smaller triangle index on interior edges
    assert np.all(m.edge_tris[interior, 0] < m.edge_tris[interior, 1])
    # unit normals, orthogonal tangents, outward of T+
    assert np.allclose(np.linalg.norm(m.edge_normal, axis=1), 1.0)
    assert np.allclose(np.einsum("ei,ei->e", m.edge_normal, m.edge_tangent), 0.0)
    centroids = m.vertices[m.triangles].mean(axis=1)
    dots = np.einsum("ei,ei->e", m.edge_normal, m.edge_midpoint - centroids[m.edge_tris[:, 0]])
    assert np.all(dots > 0)
    # boundary normals point out of the unit square
    for e in np.flatnonzero(~interior):
        outward = m.edge_midpoint[e] + 1e-3 * m.edge_normal[e]
        assert not (0 <= outward[0] <= 1 and 0 <= outward[1] <= 1)


def test_refine_counts_and_hmax():
    m = unit_square_mesh(1)
    r = refine_uniform(m)
    assert r.num_triangles == 8
    assert r.parent_tri is not None and np.all(r.parent_tri == np.repeat([0, 1], 4))
    # two refinements of n=2: exact mesh sizes (binary-representable)
    m = unit_square_mesh(2)
    for k in (1, 2):
        m = refine_uniform(m)
        assert m.h_max == np.sqrt(2.0) / 2.0 / 2 ** k
        assert m.num_triangles == 8 * 4 ** k


def test_refined_equals_finer_grid_up_to_renumbering():
    a = refine_uniform(unit_square_mesh(1))
    b = unit_square_mesh(2)
    va, aa = canonical_signature(a)
    vb, ab = canonical_signature(b)
    assert np.array_equal(va, vb)
    assert np.allclose(aa, ab)


def test_shape_regularity_invariant_under_refinement():
    m = unit_square_mesh(3)
    q0 = (m.tri_diam ** 2 / m.tri_area).max()
    r = refine_uniform(m)
    q1 = (r.tri_diam ** 2 / r.tri_area).max()
    assert abs(q0 - q1) < 1e-12 * q0


def test_interior_edges_opposite_orientation():
    m = refine_uniform(unit_square_mesh(2))
    info = m.edge_side_info()
    interior = np.flatnonzero(~m.edge_is_boundary)
    for e in interior:
        for side in range(2):
            t = m.edge_tris[e, side]
            la, lb = info["local_a"][e, side], info["local_b"][e, side]
            # ccw order of (a, b) within the triangle alternates between sides
            assert (lb - la) % 3 in (1, 2)
        s0 = (info["local_b"][e, 0] - info["local_a"][e, 0]) % 3
        s1 = (info["local_b"][e, 1] - info["local_a"][e, 1]) % 3
        assert {s0, s1} == {1, 2}


# --- ASCII I/O ---------------------------------------------------------------

def test_roundtrip_canonical():
    m = unit_square_mesh(1)
    text = write_mesh(m)
    again = write_mesh(read_mesh(text))
    assert text == again
    # comments and spacing normalize away
    noisy = "# unit square\n 4   2 \n0 0\n1 0 # se\n0 1\n1 1\n0 1 3\n1 3 2\n"
    parsed = read_mesh(noisy)
    assert write_mesh(read_mesh(write_mesh(parsed))) == write_mesh(parsed)


def test_empty_mesh_rejected():
    with pytest.raises(MeshError, match="empty mesh"):
        read_mesh("2 0\n0 0\n1 0\n")


def test_clockwise_reoriented_with_warning():
    text = "3 1\n0 0\n1 0\n0 1\n0 2 1\n"  # clockwise triangle
    m = read_mesh(text)
    assert m.io_warnings == 1
    assert m.tri_area[0] > 0


def test_dangling_vertex_index():
    text = "3 1\n0 0\n1 0\n0 1\n0 1 7\n"
    with pytest.raises(MeshError, match="line 5.*dangling"):
        read_mesh(text)


def test_malformed_counts_and_lines():
    with pytest.raises(MeshError, match="header"):
        read_mesh("4\n")
    with pytest.raises(MeshError, match="malformed counts"):
        read_mesh("four 2\n")
    with pytest.raises(MeshError, match="line 2"):
        read_mesh("3 1\n0\n1 0\n0 1\n0 1 2\n")


def test_degenerate_triangle_rejected():
    text = "3 1\n0 0\n1 0\n2 0\n0 1 2\n"
    with pytest.raises(MeshError, match="degenerate"):
        read_mesh(text)


def test_build_rejects_nonccw():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="counterclockwise"):
        build_triangulation(verts, np.array([[0, 2, 1]]))
