"""Uniform triangulations of the square (-1, 1)^2 with red refinement.

The initial grid subdivides the square into 4x4 Cartesian cells of side 1/2,
each split into two right isosceles triangles by a diagonal whose orientation
alternates in a checkerboard pattern.  The phase of the pattern is chosen so
that every corner cell's diagonal passes through the domain corner, which
guarantees that no triangle has more than one boundary edge.  The resulting
mesh size (largest cell diameter) is h = 1/sqrt(2), and each uniform red
refinement halves it exactly.

All connectivity is immutable after construction.  Interior faces store the
pair of adjacent elements as (plus, minus) with ``plus`` the larger element
index; the stored unit normal points out of the plus element.  Boundary faces
store their single element and the outward unit normal of the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Local edge i of triangle (v0, v1, v2) is the edge opposite vertex i.
_LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class Mesh:
    """Conforming triangular mesh with precomputed face connectivity.

    Attributes
    ----------
    vertices : (nv, 2) float array
        Vertex coordinates.
    triangles : (nt, 3) int array
        Vertex indices per triangle, counterclockwise.
    level : int
        Number of uniform refinements applied to the initial grid.
    interior_faces : (ni, 4) int array
        Columns (elem_plus, ledge_plus, elem_minus, ledge_minus) with
        elem_plus > elem_minus.
    boundary_faces : (nb, 2) int array
        Columns (elem, ledge).
    face_vertices : (nf, 2) int array
        Endpoint vertex indices, interior faces first, then boundary faces.
    face_normals : (nf, 2) float array
        Unit normals; out of the plus element (interior) or out of the
        domain (boundary).
    face_lengths : (nf,) float array
    h_max : float
        Largest triangle diameter.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    level: int
    interior_faces: np.ndarray = field(init=False)
    boundary_faces: np.ndarray = field(init=False)
    face_vertices: np.ndarray = field(init=False)
    face_normals: np.ndarray = field(init=False)
    face_lengths: np.ndarray = field(init=False)
    h_max: float = field(init=False)

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        self._check_orientation()
        self._build_faces()
        edges = verts[tris] - verts[np.roll(tris, -1, axis=1)]
        diameters = np.linalg.norm(edges, axis=2).max(axis=1)
        object.__setattr__(self, "h_max", float(diameters.max()))
        for name in ("vertices", "triangles", "interior_faces",
                     "boundary_faces", "face_vertices", "face_normals",
                     "face_lengths"):
            getattr(self, name).setflags(write=False)

    def _check_orientation(self):
        p = self.vertices[self.triangles]
        cross = _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if not np.all(cross > 0.0):
            raise ValueError("triangles must be counterclockwise")

    def _build_faces(self):
        # Scan elements in order; an edge key (sorted vertex pair) is a
        # boundary face until its partner element shows up.
        first_seen: dict[tuple[int, int], tuple[int, int]] = {}
        interior = []
        for elem, tri in enumerate(self.triangles):
            for ledge, (a, b) in enumerate(_LOCAL_EDGES):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                if key in first_seen:
                    other_elem, other_ledge = first_seen.pop(key)
                    # elem scans upward, so elem > other_elem: elem is plus.
                    interior.append((elem, ledge, other_elem, other_ledge))
                else:
                    first_seen[key] = (elem, ledge)
        boundary = sorted(first_seen.values())
        interior_arr = np.array(interior, dtype=np.int64).reshape(-1, 4)
        boundary_arr = np.array(boundary, dtype=np.int64).reshape(-1, 2)

        def edge_verts(elem, ledge):
            a, b = _LOCAL_EDGES[ledge]
            return self.triangles[elem, a], self.triangles[elem, b]

        fv = [edge_verts(e, l) for e, l in interior_arr[:, :2]]
        fv += [edge_verts(e, l) for e, l in boundary_arr]
        fv_arr = np.array(fv, dtype=np.int64).reshape(-1, 2)
        # Outward normal of a CCW triangle along edge (a, b): rotate the
        # tangent b - a clockwise by 90 degrees.
        tang = self.vertices[fv_arr[:, 1]] - self.vertices[fv_arr[:, 0]]
        lengths = np.linalg.norm(tang, axis=1)
        normals = np.column_stack((tang[:, 1], -tang[:, 0])) / lengths[:, None]
        object.__setattr__(self, "interior_faces", interior_arr)
        object.__setattr__(self, "boundary_faces", boundary_arr)
        object.__setattr__(self, "face_vertices", fv_arr)
        object.__setattr__(self, "face_normals", normals)
        object.__setattr__(self, "face_lengths", lengths)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_interior_faces(self) -> int:
        return self.interior_faces.shape[0]

    @property
    def n_boundary_faces(self) -> int:
        return self.boundary_faces.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_vertices.shape[0]

    def element_diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        edges = p - np.roll(p, -1, axis=1)
        return np.linalg.norm(edges, axis=2).max(axis=1)

    def element_inradii(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        edges = np.roll(p, -1, axis=1) - p
        lens = np.linalg.norm(edges, axis=2)
        areas = 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return 2.0 * areas / lens.sum(axis=1)

    def element_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def initial_mesh(divisions: int = 4) -> Mesh:
    """Build the level-0 grid: ``divisions`` x ``divisions`` Cartesian cells
    on (-1, 1)^2, each cut by a checkerboard-alternating diagonal.

    The default 4x4 grid has 32 triangles and h_max = 1/sqrt(2).
    """
    if divisions < 1 or divisions % 2:
        raise ValueError("divisions must be a positive even integer")
    n = divisions
    side = np.linspace(-1.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side, indexing="xy")
    vertices = np.column_stack((xx.ravel(), yy.ravel()))

    def vid(i, j):
        return j * (n + 1) + i

    triangles = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                triangles += [(a, b, c), (a, c, d)]
            else:
                triangles += [(a, b, d), (b, c, d)]
    return Mesh(vertices, np.array(triangles, dtype=np.int64), level=0)


def red_refine(mesh: Mesh) -> Mesh:
    """Uniformly refine: each triangle is split into four congruent children
    by connecting edge midpoints.  Halves every edge length exactly."""
    n_old = mesh.n_vertices
    midpoint_id: dict[tuple[int, int], int] = {}
    new_coords = list(mesh.vertices)

    def midpoint(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in midpoint_id:
            midpoint_id[key] = n_old + len(midpoint_id)
            new_coords.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
        return midpoint_id[key]

    children = []
    for v0, v1, v2 in mesh.triangles:
        m01 = midpoint(v0, v1)
        m12 = midpoint(v1, v2)
        m02 = midpoint(v0, v2)
        children += [(v0, m01, m02), (m01, v1, m12),
                     (m02, m12, v2), (m01, m12, m02)]
    return Mesh(np.array(new_coords), np.array(children, dtype=np.int64),
                level=mesh.level + 1)


def mesh_at_level(level: int, divisions: int = 4) -> Mesh:
    """The initial mesh refined ``level`` times."""
    mesh = initial_mesh(divisions)
    for _ in range(level):
        mesh = red_refine(mesh)
    return mesh


def write_mesh(mesh: Mesh, path) -> None:
    """Dump in plain text: one ``v x y`` line per vertex followed by one
    ``t i j k`` line per triangle."""
    with open(path, "w") as fh:
        for x, y in mesh.vertices:
            fh.write(f"v {float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"t {i} {j} {k}\n")


def read_mesh(path, level: int = 0) -> Mesh:
    """Inverse of :func:`write_mesh`."""
    vertices, triangles = [], []
    with open(path) as fh:
        for line in fh:
            fields = line.split()
            if not fields:
                continue
            if fields[0] == "v":
                vertices.append((float(fields[1]), float(fields[2])))
            elif fields[0] == "t":
                triangles.append(tuple(int(s) for s in fields[1:4]))
            else:
                raise ValueError(f"unrecognised mesh line: {line!r}")
    return Mesh(np.array(vertices), np.array(triangles, dtype=np.int64), level)
