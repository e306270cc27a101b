"""Region quadrature against closed-form areas and lengths.

Frozen expected values for the catenoid (c=1, base at the ambient
origin) come from the closed form: the ball {r <= R} is the band
|t| <= t*(R) with cosh^2 t* + t*^2 = R^2, whose area is
2 pi (t* + sinh t* cosh t*).
"""

import warnings

import numpy as np
import pytest

from minlap import quadrature as qd
from minlap.errors import QuadratureFailureError, TruncationTooSmallError, TruncatedDomainWarning
from minlap.geometry import BasePoint
from minlap.surfaces import SurfaceSpec, make_immersion

CAT_BALL_3 = 47.42664024058057  # 2 pi (t* + sinh t* cosh t*), t*(3) = 1.586685159620587
CAT_BALL_40 = 9957.137917216593
CAT_LEVEL_LEN_3 = 31.99475498853389  # two circles of radius cosh t*(3)
CAT_AREA_T2 = 98.30017399792946  # full band |t| <= 2


@pytest.fixture(scope="module")
def plane():
    return make_immersion(SurfaceSpec(kind="graph", graph="zero", truncation={"radius": 48.0}))


@pytest.fixture(scope="module")
def catenoid():
    return make_immersion(SurfaceSpec(kind="catenoid", truncation={"t_max": 6.5}))


ORIGIN = BasePoint.origin(3)


class TestPlaneExact:
    """Polar integration cells make planar balls exact, not just accurate."""

    @pytest.mark.parametrize("r", [0.5, 2.0, 7.0, 30.0])
    def test_ball_area(self, plane, r):
        assert qd.ball_volume(plane, ORIGIN, r) == pytest.approx(np.pi * r * r, rel=1e-13)

    def test_annulus_area(self, plane):
        v = qd.annulus_volume(plane, ORIGIN, 3.0, 5.0)
        assert v == pytest.approx(np.pi * 16.0, rel=1e-13)

    def test_circle_length(self, plane):
        L = qd.level_set_integral(plane, ORIGIN, 2.0, lambda f: np.ones(f.r.shape[0]))
        assert L == pytest.approx(4 * np.pi, rel=1e-13)

    def test_moment_integrand(self, plane):
        vec = qd.region_integral(
            plane,
            ORIGIN,
            0.0,
            2.0,
            lambda f: np.stack([np.ones_like(f.r), f.r**2], axis=1),
        )
        assert vec[0] == pytest.approx(4 * np.pi, rel=1e-12)
        assert vec[1] == pytest.approx(8 * np.pi, rel=1e-12)


class TestCatenoid:
    def test_ball_small(self, catenoid):
        v = qd.ball_volume(catenoid, ORIGIN, 3.0)
        assert v == pytest.approx(CAT_BALL_3, rel=2e-5)

    def test_ball_large(self, catenoid):
        v = qd.ball_volume(catenoid, ORIGIN, 40.0)
        assert v == pytest.approx(CAT_BALL_40, rel=2e-5)

    def test_level_set_length(self, catenoid):
        L = qd.level_set_integral(catenoid, ORIGIN, 3.0, lambda f: np.ones(f.r.shape[0]))
        assert L == pytest.approx(CAT_LEVEL_LEN_3, rel=1e-5)

    def test_domain_integral_full_band(self):
        imm = make_immersion(SurfaceSpec(kind="catenoid", truncation={"t_max": 2.0}))
        assert qd.domain_integral(imm, rtol=1e-12) == pytest.approx(CAT_AREA_T2, rel=1e-10)

    def test_annulus_is_difference_of_balls(self, catenoid):
        a = qd.annulus_volume(catenoid, ORIGIN, 3.0, 5.0)
        b5 = qd.ball_volume(catenoid, ORIGIN, 5.0)
        assert a == pytest.approx(b5 - CAT_BALL_3, rel=1e-4)


class TestSmallRadius:
    @pytest.mark.parametrize("q", [(0.0, 0.0), (1.0, 2.0)])
    def test_on_surface_ball_is_nearly_flat(self, catenoid, q):
        base = BasePoint.at_chart(catenoid, q)
        for r in (0.05, 0.02):
            ratio = qd.ball_volume(catenoid, base, r) / (np.pi * r * r)
            assert 1.0 <= ratio <= 1.02

    def test_off_surface_tiny_ball_is_empty(self, catenoid):
        # the ambient origin is at distance 1 (neck radius) from the surface
        assert qd.ball_volume(catenoid, ORIGIN, 0.05) == 0.0


class TestTruncationGuards:
    def test_region_beyond_chart_raises(self, plane):
        with pytest.raises(TruncationTooSmallError):
            qd.ball_volume(plane, ORIGIN, 100.0)

    def test_region_near_chart_warns(self, plane):
        with pytest.warns(TruncatedDomainWarning):
            qd.ball_volume(plane, ORIGIN, 47.5, level=2, rtol=1e-6)

    def test_comfortable_region_is_silent(self, plane):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            qd.ball_volume(plane, ORIGIN, 2.0)


class TestRegionSup:
    def test_plane_normal_component_vanishes(self, plane):
        s = qd.region_sup(plane, ORIGIN, 1.0, 4.0, lambda f: np.abs(f.normal_component))
        assert s == 0.0

    def test_catenoid_alignment_decays(self, catenoid):
        # |dr(nu)| on the annulus 100 <= r <= 200 is ~ sqrt(2)/cosh t, tiny
        s = qd.region_sup(
            catenoid, ORIGIN, 100.0, 200.0, lambda f: np.abs(f.normal_component)
        )
        assert 0.0 < s < 0.05

    def test_empty_region_raises(self, catenoid):
        with pytest.raises(QuadratureFailureError):
            qd.region_sup(catenoid, ORIGIN, 0.0, 0.5, lambda f: f.r)
