"""Triangle meshes: construction, uniform red refinement, ASCII I/O.

A :class:`Triangulation` stores the full edge combinatorics needed for
interior-penalty assembly: every edge has a fixed orientation with the
unit normal pointing out of its first adjacent triangle ``T+`` (the one
with the smaller index; outward for boundary edges).  Instances are
immutable after construction and safe to share.
"""

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh data or malformed ASCII input."""


def cross2(a, b):
    """z-component of the cross product of 2D vectors (broadcasting)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class Triangulation:
    vertices: np.ndarray        # (nv, 2)
    triangles: np.ndarray       # (nt, 3) vertex indices, ccw
    edge_vertices: np.ndarray   # (ne, 2) endpoint indices, sorted
    edge_tris: np.ndarray       # (ne, 2) adjacent triangles, [T+, T-], -1 on boundary
    tri_edges: np.ndarray       # (nt, 3) edge index opposite each local vertex
    vertex_is_boundary: np.ndarray
    edge_is_boundary: np.ndarray
    edge_normal: np.ndarray     # (ne, 2) unit, out of T+
    edge_tangent: np.ndarray    # (ne, 2) unit, normal x tangent consistent
    edge_midpoint: np.ndarray   # (ne, 2)
    edge_length: np.ndarray     # (ne,)  h_E
    tri_area: np.ndarray        # (nt,)
    tri_diam: np.ndarray        # (nt,)  h_T
    parent_tri: np.ndarray | None = None   # set by refine_uniform
    io_warnings: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edge_vertices.shape[0]

    @property
    def h_max(self):
        return float(self.tri_diam.max())

    def tri_coords(self):
        """Vertex coordinates per triangle, shape (nt, 3, 2)."""
        return self.vertices[self.triangles]

    def vertex_tri_patches(self):
        """Vertex-to-triangle adjacency as (indptr, tris, local_vertex).

        ``tris[indptr[z]:indptr[z+1]]`` are the triangles attached to
        vertex z and ``local_vertex`` the position (0..2) of z in each.
        """
        if "v2t" not in self._cache:
            tri_ids = np.repeat(np.arange(self.num_triangles), 3)
            local_ids = np.tile(np.arange(3), self.num_triangles)
            verts = self.triangles.ravel()
            order = np.argsort(verts, kind="stable")
            indptr = np.zeros(self.num_vertices + 1, dtype=np.int64)
            np.add.at(indptr, verts + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._cache["v2t"] = (indptr, tri_ids[order], local_ids[order])
        return self._cache["v2t"]

    def vertex_patch_counts(self):
        """Number of attached triangles |T(z)| per vertex."""
        indptr, _, _ = self.vertex_tri_patches()
        return np.diff(indptr)

    def edge_side_info(self):
        """Local placement of each edge inside its adjacent triangles.

        Returns a dict of (ne, 2) arrays (column 0 for T+, 1 for T-; -1
        where there is no T-): ``local_edge`` (index of the edge within
        tri_edges) and ``local_a``/``local_b`` (local vertex index of the
        edge endpoints edge_vertices[:, 0] / [:, 1]).
        """
        if "side_info" in self._cache:
            return self._cache["side_info"]
        ne = self.num_edges
        local_edge = np.full((ne, 2), -1, dtype=np.int64)
        local_a = np.full((ne, 2), -1, dtype=np.int64)
        local_b = np.full((ne, 2), -1, dtype=np.int64)
        eids = np.arange(ne)
        for side in range(2):
            t = self.edge_tris[:, side]
            ok = t >= 0
            tri_e = self.tri_edges[t[ok]]
            local_edge[eids[ok], side] = np.argmax(tri_e == eids[ok][:, None], axis=1)
            tri_v = self.triangles[t[ok]]
            a = self.edge_vertices[ok, 0][:, None]
            b = self.edge_vertices[ok, 1][:, None]
            local_a[eids[ok], side] = np.argmax(tri_v == a, axis=1)
            local_b[eids[ok], side] = np.argmax(tri_v == b, axis=1)
        info = {"local_edge": local_edge, "local_a": local_a, "local_b": local_b}
        self._cache["side_info"] = info
        return info


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    return 0.5 * cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def build_triangulation(vertices, triangles, parent_tri=None, io_warnings=0):
    """Assemble the full edge combinatorics from vertices and triangles."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if triangles.size == 0:
        raise MeshError("empty mesh")
    nv = vertices.shape[0]
    if triangles.min() < 0 or triangles.max() >= nv:
        raise MeshError("triangle references a nonexistent vertex")
    areas = _signed_areas(vertices, triangles)
    if np.any(areas <= 0):
        bad = int(np.flatnonzero(areas <= 0)[0])
        raise MeshError(f"triangle {bad} is not counterclockwise (signed area {areas[bad]:g})")

    nt = triangles.shape[0]
    # local edge i is opposite local vertex i
    pairs = np.stack(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
    ).reshape(-1, 2)
    keys = np.sort(pairs, axis=1)
    edge_vertices, inverse, counts = np.unique(
        keys, axis=0, return_inverse=True, return_counts=True
    )
    if counts.max() > 2:
        raise MeshError("an edge is shared by more than two triangles")
    tri_edges = inverse.reshape(nt, 3)
    ne = edge_vertices.shape[0]

    edge_tris = np.full((ne, 2), -1, dtype=np.int64)
    tri_of_pair = np.repeat(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    sorted_tris = tri_of_pair[order]
    first = np.concatenate(([True], sorted_edges[1:] != sorted_edges[:-1]))
    first_idx = np.flatnonzero(first)
    edge_tris[sorted_edges[first_idx], 0] = sorted_tris[first_idx]
    second_idx = np.flatnonzero(~first)
    edge_tris[sorted_edges[second_idx], 1] = sorted_tris[second_idx]
    # T+ is the adjacent triangle with the smaller index
    interior = edge_tris[:, 1] >= 0
    swap = interior & (edge_tris[:, 0] > edge_tris[:, 1])
    edge_tris[swap] = edge_tris[swap][:, ::-1]

    edge_is_boundary = ~interior
    vertex_is_boundary = np.zeros(nv, dtype=bool)
    vertex_is_boundary[edge_vertices[edge_is_boundary].ravel()] = True

    pa = vertices[edge_vertices[:, 0]]
    pb = vertices[edge_vertices[:, 1]]
    edge_vec = pb - pa
    edge_length = np.hypot(edge_vec[:, 0], edge_vec[:, 1])
    if np.any(edge_length == 0):
        raise MeshError("degenerate edge of zero length")
    edge_tangent = edge_vec / edge_length[:, None]
    edge_normal = np.column_stack([edge_tangent[:, 1], -edge_tangent[:, 0]])
    edge_midpoint = 0.5 * (pa + pb)
    # flip normals to point out of T+
    centroids = vertices[triangles].mean(axis=1)
    outward = np.einsum("ei,ei->e", edge_normal, edge_midpoint - centroids[edge_tris[:, 0]])
    flip = outward < 0
    edge_normal[flip] *= -1.0
    edge_tangent[flip] *= -1.0

    p = vertices[triangles]
    lengths = np.stack(
        [
            np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        ],
        axis=1,
    )
    return Triangulation(
        vertices=vertices,
        triangles=triangles,
        edge_vertices=edge_vertices,
        edge_tris=edge_tris,
        tri_edges=tri_edges,
        vertex_is_boundary=vertex_is_boundary,
        edge_is_boundary=edge_is_boundary,
        edge_normal=edge_normal,
        edge_tangent=edge_tangent,
        edge_midpoint=edge_midpoint,
        edge_length=edge_length,
        tri_area=areas,
        tri_diam=lengths.max(axis=1),
        parent_tri=parent_tri,
        io_warnings=io_warnings,
    )


def unit_square_mesh(n: int) -> Triangulation:
    """Uniform n-by-n grid on [0,1]^2, each cell split by its SW-NE diagonal."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    return build_triangulation(vertices, triangles)


def refine_uniform(mesh: Triangulation) -> Triangulation:
    """Red refinement: each triangle is split into 4 congruent children."""
    nv = mesh.num_vertices
    nt = mesh.num_triangles
    mid = mesh.edge_midpoint
    vertices = np.vstack([mesh.vertices, mid])
    m = nv + mesh.tri_edges  # midpoint vertex index per (tri, local edge)
    a, b, c = mesh.triangles[:, 0], mesh.triangles[:, 1], mesh.triangles[:, 2]
    m0, m1, m2 = m[:, 0], m[:, 1], m[:, 2]
    children = np.empty((4 * nt, 3), dtype=np.int64)
    children[0::4] = np.column_stack([a, m2, m1])
    children[1::4] = np.column_stack([b, m0, m2])
    children[2::4] = np.column_stack([c, m1, m0])
    children[3::4] = np.column_stack([m0, m1, m2])
    parent = np.repeat(np.arange(nt), 4)
    return build_triangulation(vertices, children, parent_tri=parent)


def read_mesh(text: str) -> Triangulation:
    """Parse the ASCII mesh format.

    Line 1: ``nv nt``; then nv lines ``x y``; then nt lines ``i j k``
    (0-based, counterclockwise).  Lines starting with ``#`` are comments.
    Clockwise triangles are reoriented with a warning counted in
    ``Triangulation.io_warnings``; degenerate triangles are an error.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            rows.append((lineno, stripped))
    if not rows:
        raise MeshError("line 0: missing header")
    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 2:
        raise MeshError(f"line {lineno}: header must be 'nv nt'")
    try:
        nv, nt = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise MeshError(f"line {lineno}: malformed counts {parts!r}") from exc
    if nv < 3 or nt < 1:
        raise MeshError(f"line {lineno}: empty mesh (nv={nv}, nt={nt})")
    if len(rows) != 1 + nv + nt:
        raise MeshError(
            f"line {lineno}: expected {nv} vertex and {nt} triangle lines, "
            f"found {len(rows) - 1} data lines"
        )
    vertices = np.empty((nv, 2))
    for k in range(nv):
        lineno, line = rows[1 + k]
        parts = line.split()
        if len(parts) != 2:
            raise MeshError(f"line {lineno}: vertex line must be 'x y'")
        try:
            vertices[k] = [float(parts[0]), float(parts[1])]
        except ValueError as exc:
            raise MeshError(f"line {lineno}: malformed vertex {line!r}") from exc
    triangles = np.empty((nt, 3), dtype=np.int64)
    for k in range(nt):
        lineno, line = rows[1 + nv + k]
        parts = line.split()
        if len(parts) != 3:
            raise MeshError(f"line {lineno}: triangle line must be 'i j k'")
        try:
            triangles[k] = [int(p) for p in parts]
        except ValueError as exc:
            raise MeshError(f"line {lineno}: malformed triangle {line!r}") from exc
        if triangles[k].min() < 0 or triangles[k].max() >= nv:
            raise MeshError(f"line {lineno}: dangling vertex index in {line!r}")
    areas = _signed_areas(vertices, triangles)
    scale = np.maximum(vertices.max(axis=0) - vertices.min(axis=0), 1e-300).prod()
    degenerate = np.abs(areas) <= 1e-14 * scale
    if np.any(degenerate):
        k = int(np.flatnonzero(degenerate)[0])
        raise MeshError(f"line {rows[1 + nv + k][0]}: degenerate triangle")
    clockwise = areas < 0
    warnings = int(np.count_nonzero(clockwise))
    triangles[clockwise] = triangles[clockwise][:, ::-1]
    return build_triangulation(vertices, triangles, io_warnings=warnings)


def write_mesh(mesh: Triangulation) -> str:
    """Canonical ASCII form; read_mesh(write_mesh(m)) round-trips."""
    lines = [f"{mesh.num_vertices} {mesh.num_triangles}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    return "\n".join(lines) + "\n"
