"""Eigensolver against dense oracles and the Dirichlet disk spectrum."""

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.special import jn_zeros

from minlap import eigensolve as es
from minlap import meshing as ms
from minlap.geometry import BasePoint
from minlap.surfaces import SurfaceSpec, make_immersion

J01_SQ = float(jn_zeros(0, 1)[0] ** 2)  # 5.783185962946785


def _random_pencil(rng, dim):
    """Well-conditioned SPD pencil with a known dense solution."""
    A = rng.standard_normal((dim, dim))
    K = A @ A.T + dim * np.eye(dim)
    B = 0.1 * rng.standard_normal((dim, dim))
    M = B @ B.T + np.eye(dim)
    return sp.csr_matrix(K), sp.csr_matrix(M)


class TestAgainstDense:
    def test_one_by_one(self):
        K = sp.csr_matrix(np.array([[3.0]]))
        M = sp.csr_matrix(np.array([[1.5]]))
        res = es.lowest_eigenpairs(K, M, 1)
        assert res.values[0] == pytest.approx(2.0, rel=1e-14)
        assert res.method == "dense"

    def test_fifty_by_fifty_oracle(self):
        rng = np.random.default_rng(7)
        K, M = _random_pencil(rng, 50)
        res = es.lowest_eigenpairs(K, M, 5, tol=1e-12)
        assert res.method == "lanczos"  # must exercise the sparse route
        vals, _ = es.dense_eigenpairs(K, M, 5)
        assert res.values == pytest.approx(vals, rel=1e-8)
        assert np.all(res.residuals < 1e-7)

    def test_vectors_are_m_orthonormal(self):
        rng = np.random.default_rng(11)
        K, M = _random_pencil(rng, 40)
        res = es.lowest_eigenpairs(K, M, 4, tol=1e-12)
        G = res.vectors.T @ (M @ res.vectors)
        assert G == pytest.approx(np.eye(4), abs=1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        K, M = _random_pencil(rng, 60)
        a = es.lowest_eigenpairs(K, M, 3)
        b = es.lowest_eigenpairs(K, M, 3)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.vectors, b.vectors)


@pytest.fixture(scope="module")
def disk_pencil():
    imm = make_immersion(SurfaceSpec(kind="plane", truncation={"radius": 1.0}))
    mesh = ms.triangulate(imm, 32)
    pair = ms.assemble(imm, mesh)
    red, _ = ms.dirichlet_reduce(pair, mesh)
    return red


class TestDiskSpectrum:
    def test_lambda1_approaches_bessel_zero(self, disk_pencil):
        res = es.lowest_eigenpairs(disk_pencil.stiffness, disk_pencil.mass, 1)
        assert res.values[0] == pytest.approx(J01_SQ, rel=2e-3)
        assert res.values[0] > J01_SQ  # Rayleigh bound from above

    def test_low_spectrum_multiplicities(self, disk_pencil):
        # j_{0,1}^2, then the double j_{1,1}^2 pair
        res = es.lowest_eigenpairs(disk_pencil.stiffness, disk_pencil.mass, 3, tol=1e-11)
        j11sq = float(jn_zeros(1, 1)[0] ** 2)
        assert res.values[1] == pytest.approx(j11sq, rel=5e-3)
        assert res.values[2] == pytest.approx(j11sq, rel=5e-3)
        assert res.values[1] == pytest.approx(res.values[2], rel=1e-3)

    def test_refinement_decreases_lambda1(self):
        imm = make_immersion(SurfaceSpec(kind="plane", truncation={"radius": 1.0}))
        vals = []
        for res in (8, 16, 32):
            mesh = ms.triangulate(imm, res)
            red, _ = ms.dirichlet_reduce(ms.assemble(imm, mesh), mesh)
            vals.append(es.lowest_eigenpairs(red.stiffness, red.mass, 1).values[0])
        assert vals[0] > vals[1] > vals[2] > J01_SQ


class TestRescaling:
    @pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
    def test_lambda_scales_inverse_square(self, c):
        cat = make_immersion(SurfaceSpec(kind="catenoid", truncation={"t_max": 6.5}))
        mesh = ms.ball_mesh(cat, BasePoint.origin(3), 4.0, 48)
        red, _ = ms.dirichlet_reduce(ms.assemble(cat, mesh), mesh)
        red_c, _ = ms.dirichlet_reduce(ms.assemble(cat.scaled(c), mesh), mesh)
        lam = es.lowest_eigenpairs(red.stiffness, red.mass, 1, tol=1e-12).values[0]
        lam_c = es.lowest_eigenpairs(red_c.stiffness, red_c.mass, 1, tol=1e-12).values[0]
        assert lam_c == pytest.approx(lam / c**2, rel=1e-10)


class TestLambda1Curve:
    def test_curve_decreases_with_radius(self):
        imm = make_immersion(SurfaceSpec(kind="plane", truncation={"radius": 8.0}))

        def pencil(r):
            mesh = ms.ball_mesh(imm, BasePoint.origin(3), r, 24)
            red, _ = ms.dirichlet_reduce(ms.assemble(imm, mesh), mesh)
            return red.stiffness, red.mass

        radii, vals = es.lambda1_curve(pencil, [1.0, 2.0, 4.0])
        assert np.all(np.diff(vals) < 0)
        # flat scaling: lambda_1(B_r) = j01^2 / r^2
        assert vals * radii**2 == pytest.approx(J01_SQ, rel=2e-2)
