"""Volume growth, curvature audits, and alignment bands."""

import math

import numpy as np
import pytest

from minlap.diagnostics import (
    AlignmentBand,
    cheng_bound,
    curvature_audit,
    level_set_points,
    small_radius_limit,
    unit_ball_volume,
    volume_growth,
    xi_estimate,
)
from minlap.errors import NegativeCError, QuadratureFailureError
from minlap.geometry import BasePoint, SurfaceFields
from minlap.surfaces import SurfaceSpec, graph_spec_of, make_immersion

# extrinsic catenoid ball areas 2*pi*(t + sinh t cosh t) at the radius
# solving cosh^2 t + t^2 = R^2 (scipy.optimize.brentq, frozen)
CAT_AREA = {
    2.0: 20.945683542469965,
    4.0: 86.10802378379401,
    8.0: 369.92543000684032,
    16.0: 1552.5739399760389,
    28.0: 4846.8311969331662,
    40.0: 9957.1379172165944,
}
T_MAX = 6.5


@pytest.fixture(scope="module")
def catenoid():
    return make_immersion(SurfaceSpec("catenoid", truncation={"t_max": T_MAX}))

@pytest.fixture(scope="module")
def plane():
    return make_immersion(SurfaceSpec("plane", truncation={"radius": 48.0}))

@pytest.fixture(scope="module")
def plane_growth(plane):
    base = BasePoint.at_chart(plane, (0.0, 0.0))
    return volume_growth(plane, base, np.geomspace(0.5, 40.0, 8), rtol=1e-9)

@pytest.fixture(scope="module")
def cat_growth(catenoid):
    radii = np.array(sorted(CAT_AREA))
    return volume_growth(catenoid, BasePoint.origin(3), radii)

@pytest.fixture(scope="module")
def cat_audit(catenoid):
    return curvature_audit(catenoid, BasePoint.origin(3))


class TestVolumeGrowth:
    def test_plane_ratio_is_pi(self, plane_growth):
        assert np.allclose(plane_growth.ratios, math.pi, rtol=1e-12)

    def test_plane_verdicts(self, plane_growth):
        rep = plane_growth
        assert rep.monotone_verdict
        assert rep.ends_bound == 1
        assert rep.miranda_verdict
        assert not rep.flat_excess_flag
        assert abs(rep.C_n_estimate - math.pi) < 1e-10
        assert abs(rep.F_n_estimate - math.pi) < 1e-10
        assert rep.brooks_bound == pytest.approx(rep.mu_estimate**2 / 4)

    def test_catenoid_volumes_match_closed_form(self, cat_growth):
        want = np.array([CAT_AREA[r] for r in sorted(CAT_AREA)])
        assert np.allclose(cat_growth.volumes, want, rtol=2e-5)

    def test_catenoid_ratio_monotone_and_two_ends(self, cat_growth):
        assert cat_growth.monotone_verdict
        assert cat_growth.ends_bound == 2
        assert cat_growth.flat_excess_flag
        assert cat_growth.miranda_verdict
        # growth constant approaches two planes' worth of area
        assert 1.97 < cat_growth.C_n_estimate / math.pi < 2.0

    def test_miranda_rhs_formula(self, cat_growth):
        w3 = unit_ball_volume(3)
        want = 4.5 * w3 * cat_growth.radii**2
        assert np.allclose(cat_growth.miranda_rhs, want, rtol=1e-14)
        assert np.allclose(cat_growth.miranda_rhs, 6 * math.pi * cat_growth.radii**2,
                           rtol=1e-14)

    def test_needs_three_ascending_radii(self, plane):
        base = BasePoint.at_chart(plane, (0.0, 0.0))
        with pytest.raises(ValueError):
            volume_growth(plane, base, [1.0, 2.0])
        with pytest.raises(ValueError):
            volume_growth(plane, base, [1.0, 3.0, 2.0])

    def test_mu_partial_tracks_prefixes(self, cat_growth):
        assert np.isnan(cat_growth.mu_partial[0])
        assert cat_growth.mu_partial[-1] == pytest.approx(cat_growth.mu_estimate)


class TestSmallRadiusLimit:
    def test_plane_exactly_one(self, plane):
        base = BasePoint.at_chart(plane, (0.0, 0.0))
        vals = small_radius_limit(plane, base, [0.1, 0.01], rtol=1e-9)
        assert np.allclose(vals, 1.0, rtol=1e-12)

    def test_catenoid_decreasing_to_one(self, catenoid):
        base = BasePoint.at_chart(catenoid, (0.0, 0.0))
        vals = small_radius_limit(catenoid, base, [0.1, 0.05, 0.02])
        assert np.all(vals >= 1.0 - 1e-9)
        assert np.all(vals <= 1.02)
        assert np.all(np.diff(vals) < 0)

    def test_needs_on_surface_base(self, catenoid):
        with pytest.raises(ValueError):
            small_radius_limit(catenoid, BasePoint.origin(3), [0.1])


class TestChengBound:
    def test_value(self):
        assert cheng_bound(4.0, 2) == 1.0
        assert cheng_bound(0.0, 5) == 0.0
        assert cheng_bound(1.0, 3) == 1.0

    def test_negative_raises(self):
        with pytest.raises(NegativeCError):
            cheng_bound(-0.5, 2)


class TestOmegaRatios:
    def test_successive_ball_volumes(self):
        # w_{n+1}/w_n stays above sqrt(2 pi)/sqrt(n+2); used when trading
        # ambient ball volume against hypersurface ball volume
        for n in range(1, 11):
            ratio = unit_ball_volume(n + 1) / unit_ball_volume(n)
            assert ratio >= math.sqrt(2 * math.pi) / math.sqrt(n + 2)

    def test_known_values(self):
        assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
        assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)


class TestShellSampling:
    def test_points_lie_on_shell(self, catenoid):
        base = BasePoint.origin(3)
        for r in (2.0, 20.0):
            Q = level_set_points(catenoid, base, r, 64)
            rr = SurfaceFields(catenoid, Q, base=base).r
            assert np.allclose(rr, r, rtol=1e-12)

    def test_disk_chart_shell(self, plane):
        base = BasePoint.at_chart(plane, (1.0, 2.0))
        Q = level_set_points(plane, base, 3.0, 64)
        d = np.linalg.norm(Q - np.array([1.0, 2.0]), axis=1)
        assert np.allclose(d, 3.0, rtol=1e-12)

    def test_shell_below_reach_raises(self, catenoid):
        with pytest.raises(QuadratureFailureError):
            level_set_points(catenoid, BasePoint.origin(3), 0.5, 32)


class TestCurvatureAudit:
    def test_catenoid_equality_only_at_neck(self, cat_audit):
        aud = cat_audit
        assert aud.curvature_bound_verdict == "pass_equality_only_at"
        assert aud.sample_product.max() <= 1.0 + 1e-9
        assert len(aud.equality_points) > 0
        assert np.all(np.abs(aud.equality_points[:, 0]) < 1e-9)
        assert aud.strict_witness is not None
        assert aud.strict_witness[2] < 1.0 - 1e-6
        assert aud.fail_witness is None

    def test_catenoid_product_decays(self, cat_audit):
        trend = cat_audit.decay_trend
        assert np.all(np.diff(trend) < 0)
        assert cat_audit.decays_to_zero
        assert trend[-1] < 1e-2
        assert cat_audit.trend_consistent

    def test_catenoid_total_curvature(self, cat_audit):
        # 2 * integral of kappa^2 = 8 pi tanh(T) on the truncated catenoid
        want = 8 * math.pi * math.tanh(T_MAX)
        assert cat_audit.total_curvature == pytest.approx(want, rel=1e-8)

    def test_catenoid_a2_growth_bounded(self, cat_audit):
        a2 = cat_audit.a2_ratio
        assert np.all(np.diff(a2) > 0)
        assert a2[-1] < 8 * math.pi

    def test_catenoid_alignment_converges(self, cat_audit):
        band = cat_audit.xi_band
        assert isinstance(band, AlignmentBand)
        assert np.all(np.diff(band.upper[1:]) < 0)
        assert band.converged

    def test_neck_base_fails_near_antipode(self, catenoid):
        base = BasePoint.at_chart(catenoid, (0.0, 0.0))
        aud = curvature_audit(
            catenoid, base, per_axis=151,
            shell_radii=np.array([2.5, 10.0, 80.0]),
        )
        assert aud.curvature_bound_verdict == "fail"
        pt, r_wit, prod = aud.fail_witness
        assert abs(r_wit - 2.0) < 5e-3
        assert prod > 1.5

    def test_plane_strict(self, plane):
        base = BasePoint.at_chart(plane, (0.0, 0.0))
        aud = curvature_audit(
            plane, base, per_axis=101,
            shell_radii=np.array([4.0, 16.0, 40.0]),
            graph=graph_spec_of(SurfaceSpec("plane")),
        )
        assert aud.curvature_bound_verdict == "pass_strict"
        assert aud.sample_product.max() == 0.0
        assert aud.graph_bound_verdict == "pass_strict"
        assert aud.total_curvature == 0.0
        assert np.all(aud.xi_band.upper < 1e-12)

    def test_half_square_graph_bound_fails(self):
        spec = SurfaceSpec("graph", graph="half_square", truncation={"radius": 8.0})
        imm = make_immersion(spec)
        base = BasePoint.at_chart(imm, (0.0, 0.0))
        aud = curvature_audit(
            imm, base, per_axis=101,
            shell_radii=np.array([1.0, 3.0]),
            graph=graph_spec_of(spec),
        )
        assert aud.graph_bound_verdict == "fail"
        pt, lhs, rhs = aud.graph_bound_witness
        assert lhs > rhs


class TestAlignmentBand:
    def test_linear_graph_is_flat(self):
        spec = SurfaceSpec("graph", graph="linear", truncation={"radius": 40.0})
        imm = make_immersion(spec)
        base = BasePoint.at_chart(imm, (0.0, 0.0))
        band = xi_estimate(imm, base, [4.0, 16.0, 30.0], 128)
        assert np.all(band.upper < 1e-12)
        assert band.converged

    def test_cubic_graph_does_not_converge(self):
        spec = SurfaceSpec("graph", graph="cubic", truncation={"radius": 40.0})
        imm = make_immersion(spec)
        base = BasePoint.at_chart(imm, (0.0, 0.0))
        band = xi_estimate(imm, base, [4.0, 8.0, 16.0, 30.0], 256)
        assert band.upper[-1] > 5e-2
        assert not band.converged

    def test_catenoid_band_shrinks(self, cat_audit):
        band = cat_audit.xi_band
        assert band.upper[-1] < 2e-2
        assert band.upper[-1] - band.lower[-1] < 2e-2


class TestHypothesisChain:
    """Curvature decay forces alignment decay forces planar-end volume."""

    def test_catenoid_chain(self, cat_audit, cat_growth):
        assert cat_audit.decay_trend[-1] < 1e-2       # distance-curvature decay
        assert cat_audit.xi_band.upper[-1] < 5e-2     # hence alignment decay
        ends_area = cat_growth.ends_bound * cat_growth.omega_n
        assert abs(cat_growth.C_n_estimate - ends_area) / ends_area < 0.05
