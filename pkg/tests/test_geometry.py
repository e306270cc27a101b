"""Pointwise differential geometry against hand-computed values.

The catenoid (c=1) and helicoid have closed-form frames, so every field
exposed by geometry can be checked against an explicit formula.
"""

import numpy as np
import pytest

from minlap import geometry
from minlap.errors import BaseCoincidesError, RankDeficientError
from minlap.geometry import BasePoint, Immersion, ChartDomain, SurfaceFields
from minlap.surfaces import SurfaceSpec, make_immersion

COSH1 = np.cosh(1.0)
SECH2_1 = 0.4199743416140261  # 1/cosh(1)^2
R_CAT_10 = 1.8387761814701145  # sqrt(cosh(1)^2 + 1)


@pytest.fixture(scope="module")
def catenoid():
    return make_immersion(SurfaceSpec(kind="catenoid", truncation={"t_max": 4.0}))


@pytest.fixture(scope="module")
def helicoid():
    return make_immersion(
        SurfaceSpec(kind="helicoid", truncation={"rho_max": 4.0, "theta_max": np.pi})
    )


@pytest.fixture(scope="module")
def plane():
    return make_immersion(SurfaceSpec(kind="graph", graph="zero", truncation={"radius": 8.0}))


class TestPointFrame:
    def test_catenoid_metric_is_conformal(self, catenoid):
        fr = geometry.point_frame(catenoid, (1.0, 0.7))
        assert fr.metric == pytest.approx(np.diag([COSH1**2, COSH1**2]), abs=1e-12)
        assert fr.sqrt_det_g == pytest.approx(COSH1**2, rel=1e-12)

    def test_catenoid_principal_curvatures(self, catenoid):
        fr = geometry.point_frame(catenoid, (1.0, 0.7))
        assert fr.principal_curvatures == pytest.approx([-SECH2_1, SECH2_1], abs=1e-10)
        assert fr.mean_curvature == pytest.approx(0.0, abs=1e-12)

    def test_catenoid_normal(self, catenoid):
        fr = geometry.point_frame(catenoid, (1.0, 0.0))
        expect = np.array([-1.0, 0.0, np.sinh(1.0)]) / COSH1
        assert fr.normal == pytest.approx(expect, abs=1e-12)

    def test_helicoid_principal_curvatures(self, helicoid):
        fr = geometry.point_frame(helicoid, (0.7, 0.3))
        k = 1.0 / (0.7**2 + 1.0)
        assert fr.principal_curvatures == pytest.approx([-k, k], abs=1e-10)
        assert abs(fr.mean_curvature) < 1e-12

    def test_graph_normal_orientation(self, plane):
        fr = geometry.point_frame(plane, (0.3, -0.2))
        assert fr.normal == pytest.approx([0.0, 0.0, 1.0], abs=1e-14)

    def test_rank_deficient_raises(self):
        dom = ChartDomain(kind="rectangle", bounds=((-1.0, 1.0), (-1.0, 1.0)))
        collapsed = Immersion(
            n=2,
            chart_domain=dom,
            F=lambda Q: np.stack([Q[:, 0], Q[:, 0], np.zeros(Q.shape[0])], axis=1),
        )
        with pytest.raises(RankDeficientError):
            geometry.point_frame(collapsed, (0.1, 0.2))


class TestFiniteDifferenceFallback:
    """Analytic chart derivatives agree with the finite-difference route."""

    @pytest.mark.parametrize("kind,q", [("catenoid", (0.8, 1.1)), ("helicoid", (1.3, 0.4))])
    def test_jacobians_match(self, kind, q):
        if kind == "catenoid":
            spec = SurfaceSpec(kind=kind, truncation={"t_max": 4.0})
        else:
            spec = SurfaceSpec(kind=kind, truncation={"rho_max": 4.0, "theta_max": np.pi})
        imm = make_immersion(spec)
        numeric = Immersion(n=2, chart_domain=imm.chart_domain, F=imm.F)
        assert not numeric.analytic
        Q = np.asarray([q], dtype=float)
        assert numeric.dF(Q) == pytest.approx(imm.dF(Q), abs=1e-8)
        assert numeric.d2F(Q) == pytest.approx(imm.d2F(Q), abs=1e-5)


class TestExtrinsicCalculus:
    def test_catenoid_distance_value(self, catenoid):
        calc = geometry.extrinsic_calculus(catenoid, BasePoint.origin(3), (1.0, 0.0))
        assert calc.r == pytest.approx(R_CAT_10, rel=1e-14)

    def test_gradient_identity_two_routes(self, catenoid):
        # 1 - |grad r|^2 computed from the tangential projection must equal
        # the squared normal component of the unit offset direction.
        base = BasePoint.origin(3)
        for q in [(1.0, 0.0), (0.4, 2.0), (-1.7, 4.1), (2.5, 0.9)]:
            calc = geometry.extrinsic_calculus(catenoid, base, q)
            lhs = 1.0 - calc.grad_norm**2
            assert lhs == pytest.approx(calc.normal_component**2, abs=1e-10)

    def test_laplacian_bounds(self, catenoid):
        base = BasePoint.origin(3)
        n = catenoid.n
        for q in [(1.0, 0.0), (0.4, 2.0), (-2.1, 5.0)]:
            calc = geometry.extrinsic_calculus(catenoid, base, q)
            assert (n - 1) / calc.r - 1e-12 <= calc.laplacian_r <= n / calc.r + 1e-12

    def test_hessian_trace_is_dimension(self, catenoid):
        base = BasePoint.origin(3)
        calc = geometry.extrinsic_calculus(catenoid, base, (0.9, 1.4))
        assert np.trace(calc.hess_h) == pytest.approx(catenoid.n, abs=1e-11)

    def test_plane_through_base_is_sharp(self, plane):
        # offset lies in the surface: |grad r| = 1 and the lower Laplacian
        # bound (n-1)/r is attained.
        calc = geometry.extrinsic_calculus(plane, BasePoint.origin(3), (0.5, 1.0))
        assert calc.grad_norm == pytest.approx(1.0, abs=1e-13)
        assert calc.normal_component == pytest.approx(0.0, abs=1e-13)
        assert calc.laplacian_r == pytest.approx((plane.n - 1) / calc.r, rel=1e-12)

    def test_neck_quadratic_form_vanishes(self, catenoid):
        # At the neck the circle direction has h-Hessian 1 + kappa (w.nu) = 0.
        base = BasePoint.origin(3)
        val = geometry.hessian_h_quadratic(catenoid, base, (0.0, 0.0), (0.0, 1.0))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_base_on_surface_raises(self, catenoid):
        base = BasePoint.at_chart(catenoid, (1.0, 0.0))
        with pytest.raises(BaseCoincidesError):
            geometry.extrinsic_calculus(catenoid, base, (1.0, 0.0))


class TestSurfaceFields:
    def test_grad_norm_consistent_with_chart_gradient(self, catenoid):
        Q = np.array([[1.0, 0.0], [0.4, 2.0], [-1.7, 4.1]])
        f = SurfaceFields(catenoid, Q, base=BasePoint.origin(3))
        gsq = np.einsum("mi,mij,mj->m", f.dist_grad_chart, f.metric, f.dist_grad_chart)
        assert gsq == pytest.approx(f.grad_norm**2, abs=1e-12)

    def test_laplacian_of_harmonic_chart_coordinate(self, catenoid):
        # t and theta are harmonic on the catenoid; t^2 has Laplacian 2/cosh^2 t.
        Q = np.array([[0.5, 1.0], [1.5, 2.0], [-0.8, 0.3]])
        f = SurfaceFields(catenoid, Q)
        m = Q.shape[0]
        Du_t = np.stack([np.ones(m), np.zeros(m)], axis=1)
        D2_zero = np.zeros((m, 2, 2))
        assert f.laplacian_of(D2_zero, Du_t) == pytest.approx(np.zeros(m), abs=1e-12)
        Du_tsq = np.stack([2 * Q[:, 0], np.zeros(m)], axis=1)
        D2_tsq = np.zeros((m, 2, 2))
        D2_tsq[:, 0, 0] = 2.0
        expect = 2.0 / np.cosh(Q[:, 0]) ** 2
        assert f.laplacian_of(D2_tsq, Du_tsq) == pytest.approx(expect, rel=1e-10)

    def test_flat_laplacian_on_plane(self, plane):
        Q = np.array([[0.2, 0.4], [1.0, -1.0]])
        f = SurfaceFields(plane, Q)
        m = Q.shape[0]
        Du = np.stack([2 * Q[:, 0], np.zeros(m)], axis=1)
        D2 = np.zeros((m, 2, 2))
        D2[:, 0, 0] = 2.0
        assert f.laplacian_of(D2, Du) == pytest.approx(2 * np.ones(m), abs=1e-13)


class TestRescaling:
    @pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
    def test_homothety_scalings(self, catenoid, c):
        scaled = catenoid.scaled(c)
        q = (0.9, 1.3)
        fr = geometry.point_frame(catenoid, q)
        fs = geometry.point_frame(scaled, q)
        assert fs.metric == pytest.approx(c**2 * fr.metric, rel=1e-12)
        assert fs.principal_curvatures == pytest.approx(
            fr.principal_curvatures / c, rel=1e-9, abs=1e-12
        )
        calc = geometry.extrinsic_calculus(catenoid, BasePoint.origin(3), q)
        calc_s = geometry.extrinsic_calculus(scaled, BasePoint.origin(3), q)
        assert calc_s.r == pytest.approx(c * calc.r, rel=1e-13)
        assert calc_s.grad_norm == pytest.approx(calc.grad_norm, abs=1e-12)
