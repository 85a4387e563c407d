"""Mesh construction, refinement, and dump-format tests.

Expected counts are derived by hand for the 4x4 initial grid: 32 triangles,
(4+1)^2 = 25 vertices, and 16 boundary edges (4 per side).  The total edge
count follows from 3*32 = 2*interior + boundary, giving 40 interior faces,
and Euler's formula V - E + T = 25 - 56 + 32 = 1 cross-checks the counts.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldgflow.mesh import (
    Mesh,
    initial_mesh,
    mesh_at_level,
    read_mesh,
    red_refine,
    write_mesh,
)


def euler_characteristic(mesh):
    return mesh.n_vertices - mesh.n_faces + mesh.n_triangles


class TestInitialMesh:
    def test_counts(self):
        mesh = initial_mesh()
        assert mesh.n_triangles == 32
        assert mesh.n_vertices == 25
        assert mesh.n_interior_faces == 40
        assert mesh.n_boundary_faces == 16

    def test_total_area_is_domain_area(self):
        # The square (-1, 1)^2 has measure 4; triangle areas must tile it.
        areas = initial_mesh().element_areas()
        assert np.all(areas > 0)
        assert areas.sum() == pytest.approx(4.0, abs=1e-14)

    def test_h_max_is_cell_diagonal(self):
        # 4x4 cells of side 1/2, so the longest edge is the diagonal 1/sqrt(2).
        assert initial_mesh().h_max == pytest.approx(np.sqrt(0.5), rel=1e-15)

    def test_at_most_one_boundary_edge_per_triangle(self):
        # The checkerboard diagonal phase puts corner-cell diagonals through
        # the domain corners, so no triangle owns two boundary edges (this
        # keeps inverse trace constants uniform over the family).
        for level in range(3):
            mesh = mesh_at_level(level)
            counts = np.bincount(mesh.boundary_faces[:, 0],
                                 minlength=mesh.n_triangles)
            assert counts.max() == 1

    def test_divisions_validation(self):
        with pytest.raises(ValueError):
            initial_mesh(3)
        with pytest.raises(ValueError):
            initial_mesh(0)

    def test_orientation_rejected(self):
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            Mesh(verts, np.array([[0, 2, 1]]), level=0)


@pytest.fixture(scope="module")
def mesh():
    return mesh_at_level(1)


class TestFaces:
    def test_normals_unit_length(self, mesh):
        norms = np.linalg.norm(mesh.face_normals, axis=1)
        np.testing.assert_allclose(norms, 1.0, rtol=1e-14)

    def test_face_lengths_match_endpoints(self, mesh):
        ends = mesh.vertices[mesh.face_vertices]
        lengths = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
        np.testing.assert_allclose(mesh.face_lengths, lengths, rtol=1e-14)

    def test_interior_normal_points_from_plus_to_minus(self, mesh):
        centroids = mesh.vertices[mesh.triangles].mean(axis=1)
        plus, minus = mesh.interior_faces[:, 0], mesh.interior_faces[:, 2]
        n = mesh.face_normals[: mesh.n_interior_faces]
        dots = np.einsum("fj,fj->f", centroids[minus] - centroids[plus], n)
        assert np.all(dots > 0)
        assert np.all(plus > minus)

    def test_boundary_normal_points_out_of_domain(self, mesh):
        mids = mesh.vertices[mesh.face_vertices[mesh.n_interior_faces:]]
        mids = mids.mean(axis=1)
        n = mesh.face_normals[mesh.n_interior_faces:]
        outside = mids + 1e-6 * n
        assert np.all(np.abs(outside).max(axis=1) > 1.0)
        inside = mids - 1e-6 * n
        assert np.all(np.abs(inside).max(axis=1) < 1.0)

    def test_interior_face_shared_edge_consistent(self, mesh):
        # Both incident elements must agree on the geometric edge.
        from ldgflow.mesh import _LOCAL_EDGES

        for ep, lp, em, lm in mesh.interior_faces:
            ap, bp = (mesh.triangles[ep, i] for i in _LOCAL_EDGES[lp])
            am, bm = (mesh.triangles[em, i] for i in _LOCAL_EDGES[lm])
            assert {ap, bp} == {am, bm}

    def test_boundary_faces_lie_on_square_boundary(self, mesh):
        ends = mesh.vertices[mesh.face_vertices[mesh.n_interior_faces:]]
        on_boundary = np.abs(ends).max(axis=2) == 1.0
        # An edge is on the boundary iff both endpoints share a +-1 coordinate.
        same_side = np.any(
            (np.abs(ends[:, 0]) == 1.0) & (ends[:, 0] == ends[:, 1]), axis=1
        )
        assert np.all(on_boundary.all(axis=1))
        assert np.all(same_side)


class TestRefinement:
    def test_counts_scale_by_four(self):
        mesh = initial_mesh()
        for level in (1, 2, 3):
            mesh = red_refine(mesh)
            assert mesh.n_triangles == 32 * 4**level
            side = 4 * 2**level
            assert mesh.n_vertices == (side + 1) ** 2
            assert mesh.level == level

    def test_h_halves_exactly(self):
        # Midpoints of dyadic-rational coordinates are exact in binary
        # floating point, so h_max halves bitwise.
        h0 = initial_mesh().h_max
        for level in (1, 2, 3):
            assert mesh_at_level(level).h_max == h0 / 2**level

    def test_children_partition_parent(self):
        coarse = mesh_at_level(1)
        fine = red_refine(coarse)
        parent_areas = coarse.element_areas()
        child_areas = fine.element_areas().reshape(-1, 4)
        np.testing.assert_allclose(child_areas.sum(axis=1), parent_areas,
                                   rtol=1e-14)
        # Each child's centroid lies inside (the convex hull of) its parent.
        pv = coarse.vertices[coarse.triangles]
        centroids = fine.vertices[fine.triangles].mean(axis=1).reshape(-1, 4, 2)
        for e in range(coarse.n_triangles):
            a, b, c = pv[e]
            t = np.linalg.solve(
                np.column_stack((b - a, c - a)), (centroids[e] - a).T
            ).T
            assert np.all(t > 0) and np.all(t.sum(axis=1) < 1)

    def test_child_vertex_convention(self):
        # Child 4e keeps parent vertex v0; child 4e+3 is the middle triangle
        # built from the three edge midpoints.  Transfer operators rely on it.
        coarse = mesh_at_level(0)
        fine = red_refine(coarse)
        for e, (v0, v1, v2) in enumerate(coarse.triangles):
            p0, p1, p2 = coarse.vertices[[v0, v1, v2]]
            child0 = fine.vertices[fine.triangles[4 * e]]
            np.testing.assert_array_equal(child0[0], p0)
            middle = fine.vertices[fine.triangles[4 * e + 3]]
            np.testing.assert_array_equal(
                middle, np.array([(p0 + p1) / 2, (p1 + p2) / 2, (p0 + p2) / 2])
            )

    def test_total_area_preserved(self):
        for level in (1, 2):
            areas = mesh_at_level(level).element_areas()
            assert areas.sum() == pytest.approx(4.0, abs=1e-13)

    @given(level=st.integers(0, 2), divisions=st.sampled_from([2, 4, 6]))
    @settings(max_examples=12, deadline=None)
    def test_euler_characteristic(self, level, divisions):
        mesh = mesh_at_level(level, divisions)
        assert euler_characteristic(mesh) == 1
        assert 2 * mesh.n_interior_faces + mesh.n_boundary_faces \
            == 3 * mesh.n_triangles


class TestDumpFormat:
    def test_roundtrip_is_bitwise(self, tmp_path):
        mesh = mesh_at_level(1)
        path = tmp_path / "mesh.txt"
        write_mesh(mesh, path)
        back = read_mesh(path, level=mesh.level)
        np.testing.assert_array_equal(back.vertices, mesh.vertices)
        np.testing.assert_array_equal(back.triangles, mesh.triangles)
        assert back.h_max == mesh.h_max

    def test_format_lines(self, tmp_path):
        path = tmp_path / "mesh.txt"
        write_mesh(initial_mesh(2), path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("v ")
        assert lines[-1].startswith("t ")
        kinds = {line.split()[0] for line in lines}
        assert kinds == {"v", "t"}

    def test_unknown_line_rejected(self, tmp_path):
        path = tmp_path / "mesh.txt"
        path.write_text("v 0 0\nv 1 0\nv 0 1\nq 0 1 2\n")
        with pytest.raises(ValueError):
            read_mesh(path)


class TestDeterminismAndImmutability:
    def test_construction_is_deterministic(self):
        a, b = mesh_at_level(2), mesh_at_level(2)
        np.testing.assert_array_equal(a.vertices, b.vertices)
        np.testing.assert_array_equal(a.triangles, b.triangles)
        np.testing.assert_array_equal(a.interior_faces, b.interior_faces)

    def test_arrays_immutable(self):
        mesh = initial_mesh()
        for name in ("vertices", "triangles", "interior_faces",
                     "boundary_faces", "face_normals"):
            with pytest.raises(ValueError):
                getattr(mesh, name)[0] = 0
