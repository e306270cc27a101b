"""Growth and curvature diagnostics for immersed hypersurfaces.

Three families of audits:

* volume growth of extrinsic balls -- monotonicity of V(r)/r^n, the
  growth constant and end-count estimates, the exponential-rate proxy
  with its spectral bound, and the flat comparison inequality
  V(r) <= ((n+1)^2/2) w_{n+1} r^n;
* curvature audits -- the product of extrinsic distance with the
  largest principal curvature (bounded by 1 with controlled equality),
  its decay along shells, the graph Hessian inequality, and total
  curvature integrals;
* normal alignment -- per-shell bands of |dr(nu)|, whose decay is the
  hypothesis under which the oscillating test functions certify
  essential spectrum.

All verdicts carry the sampling resolution used; nothing here is
interval-certified.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeCError, QuadratureFailureError
from .geometry import SurfaceFields
from .quadrature import ball_volume, check_region_fits, domain_integral, region_integral

_EQUALITY_TOL = 1e-6
_SUP_TOL = 1e-9
_ALIGN_TOL = 5e-2


def unit_ball_volume(n):
    """Volume of the unit ball in n-space."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


# ---------------------------------------------------------------------------
# volume growth


@dataclass(frozen=True)
class VolumeGrowthReport:
    """Extrinsic ball volumes and the growth quantities derived from them."""

    n: int
    radii: np.ndarray
    volumes: np.ndarray
    ratios: np.ndarray  # V(r) / r^n
    monotone_verdict: bool
    monotone_tol: float
    omega_n: float
    C_n_estimate: float  # max ratio (the ratio is nondecreasing, so ~ its limit)
    F_n_estimate: float  # min ratio over the top half of the radii
    ends_bound: int
    mu_estimate: float  # least-squares slope of log V against r, top half
    mu_partial: np.ndarray  # same slope over each prefix's top half
    brooks_bound: float  # mu^2 / 4
    miranda_rhs: np.ndarray  # ((n+1)^2/2) w_{n+1} r^n
    miranda_verdict: bool
    flat_excess_flag: bool  # sup ratio exceeds w_n: more volume than one plane


def _ls_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return float("nan")
    xm, ym = x.mean(), y.mean()
    den = np.sum((x - xm) ** 2)
    if den == 0:
        return float("nan")
    return float(np.sum((x - xm) * (y - ym)) / den)


def _top_half(k):
    return slice(k // 2, k)


def volume_growth(imm, base, radii, *, level=3, rtol=1e-7, clip_frac=1.0 / 64.0):
    """Volume-growth table over ascending radii (at least three)."""
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 3 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("need at least three ascending positive radii")
    n = imm.n
    vols = np.array(
        [
            ball_volume(imm, base, r, level=level, rtol=rtol, clip_frac=clip_frac)
            for r in radii
        ]
    )
    ratios = vols / radii**n
    tol = 1e-3
    scale = np.maximum(ratios[1:], ratios[:-1])
    monotone = bool(np.all(np.diff(ratios) >= -(tol * scale + 1e-12)))
    omega = unit_ball_volume(n)
    c_est = float(ratios.max())
    top = _top_half(len(radii))
    f_est = float(ratios[top].min())
    if vols[-1] > 0:
        ends = max(1, int(math.floor(c_est / omega + 0.05)))
    else:
        ends = 0

    logv = np.where(vols > 0, np.log(np.maximum(vols, 1e-300)), np.nan)
    sel = top if np.all(vols[top] > 0) else slice(0, 0)
    mu = _ls_slope(radii[sel], logv[sel])
    mu_partial = np.full(len(radii), np.nan)
    for i in range(1, len(radii)):
        pre = _top_half(i + 1)
        if np.all(vols[pre] > 0):
            mu_partial[i] = _ls_slope(radii[pre], logv[pre])

    omega_n1 = unit_ball_volume(n + 1)
    miranda_rhs = ((n + 1) ** 2 / 2.0) * omega_n1 * radii**n
    miranda = bool(np.all(vols <= miranda_rhs * (1.0 + 1e-12)))
    return VolumeGrowthReport(
        n=n,
        radii=radii,
        volumes=vols,
        ratios=ratios,
        monotone_verdict=monotone,
        monotone_tol=tol,
        omega_n=omega,
        C_n_estimate=c_est,
        F_n_estimate=f_est,
        ends_bound=ends,
        mu_estimate=float(mu) if np.isfinite(mu) else 0.0,
        mu_partial=mu_partial,
        brooks_bound=float(mu**2 / 4.0) if np.isfinite(mu) else 0.0,
        miranda_rhs=miranda_rhs,
        miranda_verdict=miranda,
        flat_excess_flag=bool(c_est > omega + 1e-3),
    )


def small_radius_limit(imm, base, eps_list, *, level=3, rtol=1e-7):
    """V(eps) / (w_n eps^n) for shrinking balls around an on-surface base."""
    if base.chart_coords is None:
        raise ValueError("small-radius limit needs a base on the surface")
    omega = unit_ball_volume(imm.n)
    out = []
    for eps in eps_list:
        v = ball_volume(imm, base, float(eps), level=level, rtol=rtol)
        out.append(v / (omega * float(eps) ** imm.n))
    return np.asarray(out)


def cheng_bound(c, n):
    """Upper bound (n-1)^2 c / 4 for the bottom of the essential spectrum
    under a nonnegative Ricci-limit constant c."""
    if c < 0:
        raise NegativeCError("the Ricci-limit constant must be nonnegative")
    return (n - 1) ** 2 * c / 4.0


# ---------------------------------------------------------------------------
# shell sampling


def level_set_points(imm, base, r, count=512):
    """Chart points on the extrinsic sphere {r_tilde = r}.

    Disk charts are sampled along rays from the base's chart position;
    periodic bands along each angular column (both crossings).  Bounded
    rectangle charts fall back to grid points within 1% of the shell.
    """
    r = float(r)
    check_region_fits(imm, r, base)
    dom = imm.chart_domain

    def rad(Q):
        return SurfaceFields(imm, np.atleast_2d(Q), base=base).r

    if dom.kind == "disk":
        q0 = np.zeros(2) if base.chart_coords is None else np.asarray(base.chart_coords)
        phi = 2 * np.pi * (np.arange(count) + 0.5) / count
        units = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        R = dom.radius * (1 - 1e-12)
        b = units @ q0
        smax = -b + np.sqrt(np.maximum(b * b - (q0 @ q0 - R * R), 0.0))
        inside = rad(q0[None, :])[0] < r
        if not inside:
            raise QuadratureFailureError("shell radius below the distance from base to chart")
        lo = np.zeros(count)
        hi = smax
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            neg = rad(q0[None, :] + mid[:, None] * units) < r
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
        s = 0.5 * (lo + hi)
        return q0[None, :] + s[:, None] * units

    (u0, u1), (v0, v1) = dom.bounds
    if dom.periodic and dom.periodic[1]:
        cols = max(8, count // 2)
        thetas = v0 + (v1 - v0) * (np.arange(cols) + 0.5) / cols
        grid = np.linspace(u0, u1, 257)
        UU, TT = np.meshgrid(grid, thetas, indexing="ij")
        rr = rad(np.stack([UU.ravel(), TT.ravel()], axis=1)).reshape(UU.shape) - r
        k = np.argmin(rr, axis=0)
        inside = rr[k, np.arange(cols)] < 0
        pts = []
        for bnd in (u0, u1):
            sel = inside & (rr[0 if bnd == u0 else -1, :] >= 0)
            if not sel.any():
                continue
            th = thetas[sel]
            lo = grid[k[sel]]
            hi = np.full(lo.shape, bnd)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                neg = rad(np.stack([mid, th], axis=1)) < r
                lo = np.where(neg, mid, lo)
                hi = np.where(neg, hi, mid)
            pts.append(np.stack([0.5 * (lo + hi), th], axis=1))
        if not pts:
            raise QuadratureFailureError("shell does not intersect the chart")
        return np.concatenate(pts, axis=0)

    # bounded rectangle: near-shell grid filter
    grid = dom.sample_grid(max(64, int(np.sqrt(count)) * 4))
    rr = rad(grid)
    mask = np.abs(rr - r) <= 0.01 * r
    if not mask.any():
        raise QuadratureFailureError("no grid samples near the requested shell")
    return grid[mask]


@dataclass(frozen=True)
class AlignmentBand:
    """Per-shell [inf, sup] of the normal alignment |dr(nu)|."""

    radii: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    converged: bool  # band width and sup below tolerance at the last shell
    tol: float = _ALIGN_TOL


def xi_estimate(imm, base, shell_radii, samples_per_shell=512):
    """Band table of |dr(nu)| over extrinsic spheres of growing radius."""
    radii = np.asarray(shell_radii, dtype=float)
    lo, hi = [], []
    for r in radii:
        Q = level_set_points(imm, base, r, samples_per_shell)
        f = SurfaceFields(imm, Q, base=base)
        a = np.abs(f.normal_component)
        lo.append(float(a.min()))
        hi.append(float(a.max()))
    lower = np.asarray(lo)
    upper = np.asarray(hi)
    converged = bool(
        (upper[-1] - lower[-1]) <= _ALIGN_TOL and upper[-1] <= _ALIGN_TOL
    )
    return AlignmentBand(radii=radii, lower=lower, upper=upper, converged=converged)


# ---------------------------------------------------------------------------
# curvature audits


@dataclass(frozen=True)
class CurvatureAudit:
    """Distance-curvature products, their decay, and curvature integrals."""

    sample_r: np.ndarray
    sample_kappa_max: np.ndarray
    sample_product: np.ndarray  # r_tilde * max |principal curvature|
    curvature_bound_verdict: str  # pass_strict | pass_equality_only_at | fail
    equality_points: np.ndarray  # chart points where the product reaches 1
    strict_witness: tuple | None  # (chart point, r_tilde, product value < 1)
    fail_witness: tuple | None  # (chart point, r_tilde, product value > 1)
    shell_radii: np.ndarray
    decay_trend: np.ndarray  # sup of the product on each shell
    tail_sup: np.ndarray  # sup of the product over all samples beyond each shell
    trend_consistent: bool  # the two decay estimators agree
    decays_to_zero: bool
    graph_bound_verdict: str | None  # graphs only: Hessian inequality
    graph_bound_witness: tuple | None
    total_curvature: float  # integral of ||A||^n over the chart
    a2_radii: np.ndarray
    a2_ratio: np.ndarray  # integral of ||A||^2 over B_r divided by r^(n-2)
    xi_band: AlignmentBand
    resolution: dict = field(default_factory=dict)


def _principal_products(imm, base, Q):
    f = SurfaceFields(imm, Q, base=base)
    kmax = np.abs(f.principal_curvatures).max(axis=1)
    return f.r, kmax, f.r * kmax


def curvature_audit(
    imm,
    base,
    *,
    per_axis=201,
    shell_radii=None,
    samples_per_shell=512,
    a2_radii=None,
    graph=None,
    quad_level=3,
):
    """Full curvature audit; see CurvatureAudit for the fields."""
    grid = imm.chart_domain.sample_grid(per_axis)
    r, kmax, prod = _principal_products(imm, base, grid)

    sup = float(prod.max())
    eq_mask = prod >= 1.0 - _EQUALITY_TOL
    strict_mask = prod < 1.0 - _EQUALITY_TOL
    strict_witness = None
    if strict_mask.any():
        j = int(np.argmin(prod[strict_mask]))
        pt = grid[strict_mask][j]
        strict_witness = (tuple(pt), float(r[strict_mask][j]), float(prod[strict_mask][j]))
    if sup > 1.0 + _SUP_TOL:
        j = int(np.argmax(prod))
        verdict = "fail"
        fail_witness = (tuple(grid[j]), float(r[j]), float(prod[j]))
        equality_points = grid[eq_mask & (prod <= 1.0 + _SUP_TOL)]
    else:
        fail_witness = None
        if eq_mask.any():
            verdict = "pass_equality_only_at"
            equality_points = grid[eq_mask]
        else:
            verdict = "pass_strict"
            equality_points = np.zeros((0, grid.shape[1]))

    # decay of the product along shells, by two estimators
    if shell_radii is None:
        bd = imm.chart_domain.boundary_samples(512)
        rmax = float(SurfaceFields(imm, bd, base=base).r.min()) * 0.9
        rmin = max(float(r.min()) * 2.0, rmax / 64.0, 1e-6)
        shell_radii = np.geomspace(max(rmin, rmax / 64.0), rmax, 6)
    shell_radii = np.asarray(shell_radii, dtype=float)
    trend = []
    for rad_ in shell_radii:
        Q = level_set_points(imm, base, rad_, samples_per_shell)
        _, _, p = _principal_products(imm, base, Q)
        trend.append(float(p.max()))
    trend = np.asarray(trend)
    tail = np.array([float(prod[r >= rad_].max()) if np.any(r >= rad_) else 0.0
                     for rad_ in shell_radii])
    # the tail sup includes all later shells: estimators agree when the
    # shell sup tracks the tail sup within a coarse factor or both are small
    trend_consistent = bool(
        np.all((tail <= np.maximum.accumulate(trend[::-1])[::-1] + 5e-2))
    )
    decays = bool(trend[-1] < 1e-2)

    gb_verdict = gb_witness = None
    if graph is not None and graph.Df is not None and graph.D2f is not None:
        gb_verdict, gb_witness = _graph_hessian_bound(graph, grid)

    n = imm.n

    def a_norm_pow(f):
        return np.maximum(f.second_form_norm_sq, 0.0) ** (n / 2.0)

    total = domain_integral(imm, a_norm_pow, rtol=1e-8)

    if a2_radii is None:
        a2_radii = shell_radii
    a2_radii = np.asarray(a2_radii, dtype=float)
    a2 = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for rad_ in a2_radii:
            val = region_integral(
                imm, base, 0.0, rad_, lambda f: f.second_form_norm_sq,
                level=quad_level, rtol=1e-7,
            )
            a2.append(val / rad_ ** (n - 2) if n != 2 else val)
    a2 = np.asarray(a2)

    band = xi_estimate(imm, base, shell_radii, samples_per_shell)
    return CurvatureAudit(
        sample_r=r,
        sample_kappa_max=kmax,
        sample_product=prod,
        curvature_bound_verdict=verdict,
        equality_points=equality_points,
        strict_witness=strict_witness,
        fail_witness=fail_witness,
        shell_radii=shell_radii,
        decay_trend=trend,
        tail_sup=tail,
        trend_consistent=trend_consistent,
        decays_to_zero=decays,
        graph_bound_verdict=gb_verdict,
        graph_bound_witness=gb_witness,
        total_curvature=float(total),
        a2_radii=a2_radii,
        a2_ratio=a2,
        xi_band=band,
        resolution={
            "per_axis": per_axis,
            "samples_per_shell": samples_per_shell,
            "quad_level": quad_level,
        },
    )


def _graph_hessian_bound(graph, grid):
    """Margin of |D2f(X,X)|^2 (|x|^2 + f^2) <= 1 + |Df|^2 for unit X.

    The graph value is normalized to vanish at the chart origin before
    testing, matching the inequality's hypothesis.
    """
    f0 = float(np.asarray(graph.f(np.zeros((1, grid.shape[1]))))[0])
    fv = np.asarray(graph.f(grid)) - f0
    Df = np.asarray(graph.Df(grid))
    D2 = np.asarray(graph.D2f(grid))
    hess_sup = np.abs(np.linalg.eigvalsh(D2)).max(axis=1)
    denom = np.einsum("mi,mi->m", grid, grid) + fv**2
    lhs = hess_sup**2 * denom
    rhs = 1.0 + np.einsum("mi,mi->m", Df, Df)
    margin = rhs - lhs
    if np.all(margin >= -1e-9 * rhs):
        if np.any(margin > 1e-9 * rhs):
            return "pass_strict", None
        return "pass_equality_only_at", None
    j = int(np.argmin(margin / rhs))
    return "fail", (tuple(grid[j]), float(lhs[j]), float(rhs[j]))
