"""Annulus schedules, plateau cutoffs, and oscillating-test residuals."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minlap.errors import InvalidRatioError, TruncationTooSmallError
from minlap.geometry import BasePoint
from minlap.surfaces import SurfaceSpec, make_immersion
from minlap.weyl import Cutoff, build_schedule, certified_point, cutoff, residual

PI = math.pi


@pytest.fixture(scope="module")
def plane_schedule():
    return build_schedule(PI, PI, 2.0, 6, 1.0)


@pytest.fixture(scope="module")
def big_plane():
    return make_immersion(SurfaceSpec("plane", truncation={"radius": 1600.0}))


@pytest.fixture(scope="module")
def plane_rows(plane_schedule, big_plane):
    base = BasePoint.at_chart(big_plane, (0.0, 0.0))
    return [
        residual(big_plane, base, plane_schedule, m, 1.0, 0.0, level=3, rtol=1e-7)
        for m in range(1, 7)
    ]


class TestSchedule:
    def test_plane_mass_fraction(self, plane_schedule):
        assert plane_schedule.tau == 3.0 / 16.0
        assert plane_schedule.theta == 1.0

    def test_catenoid_mass_fraction(self):
        sch = build_schedule(2 * PI, PI, 2.0, 3, 1.0)
        assert sch.tau == 3.0 / 32.0
        assert sch.theta == pytest.approx(math.sqrt(2.0), rel=1e-15)

    def test_mass_fraction_identity(self, plane_schedule):
        # the recipe saturates (F/C)(b/d)^n - (a/d)^n = tau exactly
        for sch in (plane_schedule, build_schedule(2 * PI, PI, 2.0, 4, 1.0)):
            for row in sch.rows:
                lhs = (sch.F_n / sch.C_n) * (row.b / row.d) ** sch.n - (
                    row.a / row.d
                ) ** sch.n
                assert lhs == pytest.approx(sch.tau, rel=1e-13)
                assert lhs >= sch.tau - 1e-13

    def test_row_geometry(self, plane_schedule):
        prev_eps = np.inf
        for m, row in enumerate(plane_schedule.rows, start=1):
            assert 0 < row.c < row.a < row.b < row.d
            assert row.d == 8.0 * m
            assert row.b == row.d / 2.0
            assert row.eps <= prev_eps  # scales never re-coarsen
            assert row.eps * row.deriv_bound <= 1.0 / m
            prev_eps = row.eps

    def test_frozen_plane_rows(self, plane_schedule):
        r1 = plane_schedule.rows[0]
        # E=8 with widths 1 and 4: 8*(1 + 1/4 + 1 + 1/16)
        assert r1.deriv_bound == 18.5
        assert r1.eps == 1.0 / 32.0
        r6 = plane_schedule.rows[5]
        assert r6.deriv_bound == pytest.approx(137.0 / 72.0, rel=1e-15)
        # the first row's scale persists along the whole schedule
        assert all(row.eps == 1.0 / 32.0 for row in plane_schedule.rows)

    def test_errors(self):
        with pytest.raises(InvalidRatioError):
            build_schedule(1.0, 2.0, 2.0, 3, 1.0)
        with pytest.raises(ValueError):
            build_schedule(PI, PI, 1.0, 3, 1.0)
        with pytest.raises(ValueError):
            build_schedule(PI, PI, 2.0, 3, -1.0)
        with pytest.raises(ValueError):
            build_schedule(PI, PI, 2.0, 0, 1.0)


class TestCutoff:
    def test_plateau_and_support(self, plane_schedule):
        psi = cutoff(plane_schedule, 1)
        row = plane_schedule.rows[0]
        mid = np.array([(row.a + row.b) / 2.0])
        assert psi.value(mid)[0] == 1.0
        assert psi.first(mid)[0] == 0.0
        assert psi.second(mid)[0] == 0.0
        out = np.array([row.c - 0.1, row.d + 0.1, 0.0])
        assert np.all(psi.value(out) == 0.0)
        assert np.all(psi.first(out) == 0.0)
        assert np.all(psi.second(out) == 0.0)

    def test_derivative_maxima(self, plane_schedule):
        row = plane_schedule.rows[0]
        psi = cutoff(plane_schedule, 1)
        t = np.linspace(row.c, row.d, 400001)
        w1, w2 = row.a - row.c, row.d - row.b
        assert np.abs(psi.first(t)).max() == pytest.approx(15.0 / (8.0 * w1), rel=1e-8)
        assert np.abs(psi.second(t)).max() == pytest.approx(
            10.0 / math.sqrt(3.0) / w1**2, rel=1e-6
        )
        assert np.abs(psi.first(t)).max() <= row.deriv_bound
        assert np.abs(psi.second(t)).max() <= row.deriv_bound

    def test_c2_at_knots(self, plane_schedule):
        psi = cutoff(plane_schedule, 2)
        row = plane_schedule.rows[1]
        h = 1e-6
        for knot in (row.c, row.a, row.b, row.d):
            t = np.array([knot - h, knot + h])
            v, d1, d2 = psi.value(t), psi.first(t), psi.second(t)
            assert abs(v[1] - v[0]) < 1e-5
            assert abs(d1[1] - d1[0]) < 1e-4
            assert abs(d2[1] - d2[0]) < 1e-2

    @given(
        t=st.floats(min_value=-5.0, max_value=60.0),
        m=st.integers(min_value=1, max_value=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounds_hold_everywhere(self, t, m):
        sch = build_schedule(PI, PI, 2.0, 6, 1.0)
        row = sch.rows[m - 1]
        psi = Cutoff(c=row.c, a=row.a, b=row.b, d=row.d)
        arr = np.array([t])
        assert 0.0 <= psi.value(arr)[0] <= 1.0
        assert abs(psi.first(arr)[0]) <= row.deriv_bound
        assert abs(psi.second(arr)[0]) <= row.deriv_bound


class TestPlaneResiduals:
    def test_mass_above_guarantee(self, plane_schedule, plane_rows):
        for row in plane_rows:
            assert row.mass >= plane_schedule.tau - 1e-2

    def test_mass_scale_invariant(self, plane_rows):
        # every plane row is a rescaling of the same annulus
        masses = [row.mass for row in plane_rows]
        assert np.allclose(masses, masses[0], rtol=1e-6)

    def test_bounds_dominate_terms(self, plane_rows):
        for row in plane_rows:
            assert row.term_cutoff <= row.bound_cutoff * (1.0 + 1e-6)
            assert row.term_laplacian <= row.bound_laplacian * (1.0 + 1e-6)

    def test_alignment_vanishes(self, plane_rows):
        for row in plane_rows:
            assert row.term_alignment == 0.0
            assert row.bound_alignment == 0.0

    def test_ratio_decays_fourfold(self, plane_rows):
        ratios = [row.residual_ratio for row in plane_rows]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        assert ratios[0] / ratios[-1] >= 4.0

    def test_certified_point_is_lam(self, plane_rows):
        for row in plane_rows:
            assert certified_point(row) == row.lam


@pytest.fixture(scope="module")
def catenoid():
    return make_immersion(SurfaceSpec("catenoid", truncation={"t_max": 6.5}))


@pytest.fixture(scope="module")
def cat_row(catenoid):
    sch = build_schedule(2 * PI, PI, 2.0, 2, 1.0)
    return residual(
        catenoid, BasePoint.origin(3), sch, 1, 1.0, 0.0, level=3, rtol=1e-7
    )


class TestCatenoidRow:
    def test_mass_above_guarantee(self, cat_row):
        assert cat_row.mass >= 3.0 / 32.0 - 1e-2

    def test_bounds_dominate(self, cat_row):
        assert cat_row.term_cutoff <= cat_row.bound_cutoff * (1.0 + 1e-6)
        assert cat_row.term_laplacian <= cat_row.bound_laplacian * (1.0 + 1e-6)
        # the alignment majorant is a sampled sup; integral mean stays below
        assert cat_row.term_alignment <= cat_row.bound_alignment * 1.01

    def test_alignment_tracks_shell_band(self, cat_row, catenoid):
        from minlap.diagnostics import xi_estimate

        base = BasePoint.origin(3)
        band = xi_estimate(
            catenoid, base, np.geomspace(22.0, 250.0, 5), 128
        )
        sup = band.upper.max()
        assert cat_row.bound_alignment <= cat_row.lam**2 * sup**4 * 1.05

    def test_truncation_guard(self, catenoid):
        sch = build_schedule(2 * PI, PI, 2.0, 2, 1.0)
        with pytest.raises(TruncationTooSmallError):
            residual(catenoid, BasePoint.origin(3), sch, 2, 1.0, 0.0)

    def test_needs_analytic_immersion(self, catenoid):
        from minlap.geometry import Immersion

        sch = build_schedule(PI, PI, 2.0, 1, 1.0)
        numeric = Immersion(
            n=2,
            chart_domain=catenoid.chart_domain,
            F=catenoid.F,
            analytic=False,
            label="numeric",
        )
        with pytest.raises(ValueError):
            residual(numeric, BasePoint.origin(3), sch, 1, 1.0, 0.0)

    def test_xi_validation(self, catenoid):
        sch = build_schedule(2 * PI, PI, 2.0, 1, 1.0)
        with pytest.raises(ValueError):
            residual(catenoid, BasePoint.origin(3), sch, 1, 1.0, xi=1.5)
