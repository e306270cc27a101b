"""Mesh structure, P1 element matrices, and extrinsic ball meshes."""

import numpy as np
import pytest

from minlap import meshing as ms
from minlap.errors import TruncationTooSmallError
from minlap.geometry import BasePoint
from minlap.surfaces import SurfaceSpec, make_immersion

CAT_BALL_3 = 47.42664024058057
CAT_AREA_T2 = 98.30017399792946


@pytest.fixture(scope="module")
def plane():
    return make_immersion(SurfaceSpec(kind="plane", truncation={"radius": 1.0}))


@pytest.fixture(scope="module")
def catenoid():
    return make_immersion(SurfaceSpec(kind="catenoid", truncation={"t_max": 6.5}))


class TestStructure:
    @pytest.mark.parametrize("res,expect", [(1, 5), (4, 41), (10, 221)])
    def test_disk_fan_vertex_count(self, plane, res, expect):
        assert ms.triangulate(plane, res).num_vertices == expect == 1 + 2 * res * (res + 1)

    def test_positive_orientation(self, plane):
        mesh = ms.triangulate(plane, 6)
        v, t = mesh.vertices, mesh.triangles
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        assert np.all(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0)

    def test_disk_boundary_is_outer_ring(self, plane):
        res = 5
        mesh = ms.triangulate(plane, res)
        bd = mesh.boundary_vertices()
        assert len(bd) == 4 * res
        assert np.linalg.norm(mesh.vertices[bd], axis=1) == pytest.approx(1.0, rel=1e-12)

    def test_periodic_band_has_no_seam_boundary(self, catenoid):
        mesh = ms.triangulate(catenoid, 12)
        bd = mesh.boundary_vertices()
        # only the two non-periodic rows t = +-t_max are boundary
        t_vals = mesh.vertices[bd][:, 0]
        assert np.all(np.isclose(np.abs(t_vals), 6.5))

    def test_euler_characteristic_of_disk(self, plane):
        mesh = ms.triangulate(plane, 7)
        edges = np.concatenate(
            [mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]]
        )
        E = len(np.unique(np.sort(edges, axis=1), axis=0))
        assert mesh.num_vertices - E + mesh.num_triangles == 1


class TestElementMatrices:
    def test_unit_right_triangle(self, plane):
        mesh = ms.TriMesh(
            vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            triangles=np.array([[0, 1, 2]]),
        )
        pair = ms.assemble(plane, mesh)
        K_expect = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        M_expect = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0
        assert pair.stiffness.toarray() == pytest.approx(K_expect, abs=1e-14)
        assert pair.mass.toarray() == pytest.approx(M_expect, abs=1e-16)

    def test_stiffness_kernel_is_constants(self, catenoid):
        mesh = ms.triangulate(catenoid, 10)
        pair = ms.assemble(catenoid, mesh)
        ones = np.ones(pair.dim)
        assert np.linalg.norm(pair.stiffness @ ones) < 1e-10

    def test_mass_total_is_area(self, catenoid):
        imm = make_immersion(SurfaceSpec(kind="catenoid", truncation={"t_max": 2.0}))
        mesh = ms.triangulate(imm, 48)
        pair = ms.assemble(imm, mesh)
        total = float(np.ones(pair.dim) @ (pair.mass @ np.ones(pair.dim)))
        assert total == pytest.approx(ms.mesh_area(imm, mesh), rel=1e-12)
        assert total == pytest.approx(CAT_AREA_T2, rel=2e-3)

    def test_stiffness_invariant_under_rescaling(self, catenoid):
        # cotangents see only angles: K is exactly homothety invariant,
        # while M picks up the squared scale factor.
        mesh = ms.triangulate(catenoid, 8)
        p1 = ms.assemble(catenoid, mesh)
        p2 = ms.assemble(catenoid.scaled(3.0), mesh)
        dK = (p1.stiffness - p2.stiffness).toarray()
        assert np.max(np.abs(dK)) < 1e-12
        dM = (9.0 * p1.mass - p2.mass).toarray()
        assert np.max(np.abs(dM)) < 1e-12 * 9.0 * np.max(np.abs(p1.mass.toarray()))


class TestBallMesh:
    def test_plane_ball_area(self, plane):
        imm = make_immersion(SurfaceSpec(kind="plane", truncation={"radius": 8.0}))
        mesh = ms.ball_mesh(imm, BasePoint.origin(3), 2.0, 48)
        assert ms.mesh_area(imm, mesh) == pytest.approx(np.pi * 4.0, rel=1e-3)
        bd = mesh.boundary_vertices()
        assert np.linalg.norm(mesh.vertices[bd], axis=1) == pytest.approx(2.0, rel=1e-9)

    def test_offcenter_base(self):
        imm = make_immersion(SurfaceSpec(kind="plane", truncation={"radius": 8.0}))
        base = BasePoint.at_chart(imm, (1.0, 2.0))
        mesh = ms.ball_mesh(imm, base, 1.5, 32)
        d = np.linalg.norm(mesh.vertices - np.array([1.0, 2.0]), axis=1)
        assert d.max() == pytest.approx(1.5, rel=1e-9)
        assert ms.mesh_area(imm, mesh) == pytest.approx(np.pi * 1.5**2, rel=1e-3)

    def test_catenoid_ball_area(self, catenoid):
        mesh = ms.ball_mesh(catenoid, BasePoint.origin(3), 3.0, 64)
        assert ms.mesh_area(catenoid, mesh) == pytest.approx(CAT_BALL_3, rel=1e-3)

    def test_catenoid_ball_boundary_on_level_set(self, catenoid):
        from minlap.geometry import SurfaceFields

        mesh = ms.ball_mesh(catenoid, BasePoint.origin(3), 5.0, 32)
        bd = mesh.boundary_vertices()
        f = SurfaceFields(catenoid, mesh.vertices[bd], base=BasePoint.origin(3))
        assert f.r == pytest.approx(5.0, rel=1e-9)

    def test_ball_larger_than_chart_raises(self, catenoid):
        with pytest.raises(TruncationTooSmallError):
            ms.ball_mesh(catenoid, BasePoint.origin(3), 1e5, 16)


class TestDirichletReduce:
    def test_reduction_counts(self, plane):
        mesh = ms.triangulate(plane, 6)
        pair = ms.assemble(plane, mesh)
        red, idx = ms.dirichlet_reduce(pair, mesh)
        nb = len(mesh.boundary_vertices())
        assert red.dim == mesh.num_vertices - nb
        assert len(idx) == red.dim


class TestOffExport:
    def test_round_trip(self, tmp_path, catenoid):
        mesh = ms.triangulate(catenoid, 6)
        path = tmp_path / "band.off"
        ms.write_off(path, mesh.embedded(catenoid), mesh.triangles)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "OFF"
        nv, nt, _ = map(int, lines[1].split())
        assert nv == mesh.num_vertices and nt == mesh.num_triangles
        first = np.array(lines[2].split(), dtype=float)
        assert first == pytest.approx(mesh.embedded(catenoid)[0], rel=1e-15)
        tri0 = lines[2 + nv].split()
        assert tri0[0] == "3" and len(tri0) == 4
