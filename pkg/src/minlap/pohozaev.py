"""Integral-identity audits built on the extrinsic potential h = r^2 / 2.

The core identity couples a scalar field u, a spectral parameter, and
the potential's Hessian over a domain D with two boundary integrals:

    int_D (|grad u|^2 - lam u^2) (Lap h)
      - 2 int_D Hess h(grad u, grad u)
      - 2 int_D (Lap u + lam u) g(grad h, grad u)
    = int_dD (|grad u|^2 - lam u^2) dh/dn
      - 2 int_dD g(grad h, grad u) du/dn

It holds exactly for smooth data; every computed deviation is
quadrature error, which makes the identity a sharp end-to-end test of
the distance calculus.  On top of it sit a sparse-radius selector (an
integrable boundary energy admits radii where r * energy is small) and
an eigenvalue-absence audit: convexity of h forces the Hessian energy
of any square-integrable eigenfunction to vanish, so strict convexity
somewhere leaves no room for one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotIntegrableError
from .geometry import SurfaceFields
from .quadrature import domain_integral, level_set_integral, region_integral

_VERDICT_CONSISTENT = "consistent with strict convexity"
_VERDICT_FAILS = "convexity hypothesis fails"


# ---------------------------------------------------------------------------
# scalar fields on charts


@dataclass(frozen=True)
class ScalarField:
    """Scalar function of chart coordinates with exact derivatives.

    f(Q) -> (m,), Df(Q) -> (m, n), D2f(Q) -> (m, n, n).
    """

    label: str
    f: callable
    Df: callable
    D2f: callable


def constant_field(value=1.0, n=2):
    def f(Q):
        return np.full(np.atleast_2d(Q).shape[0], float(value))

    def Df(Q):
        return np.zeros(np.atleast_2d(Q).shape)

    def D2f(Q):
        Q = np.atleast_2d(Q)
        return np.zeros((Q.shape[0], n, n))

    return ScalarField(label=f"const({value:g})", f=f, Df=Df, D2f=D2f)


def coordinate_field(axis=0, n=2):
    def f(Q):
        return np.atleast_2d(Q)[:, axis].copy()

    def Df(Q):
        Q = np.atleast_2d(Q)
        out = np.zeros_like(Q)
        out[:, axis] = 1.0
        return out

    def D2f(Q):
        Q = np.atleast_2d(Q)
        return np.zeros((Q.shape[0], n, n))

    return ScalarField(label=f"coord({axis})", f=f, Df=Df, D2f=D2f)


def bump_field(center=(0.0, 0.0), width=1.0):
    """Gaussian bump exp(-|q - q0|^2 / (2 w^2)) in chart coordinates."""
    q0 = np.asarray(center, dtype=float)
    w2 = float(width) ** 2

    def f(Q):
        d = np.atleast_2d(Q) - q0
        return np.exp(-0.5 * np.einsum("mi,mi->m", d, d) / w2)

    def Df(Q):
        d = np.atleast_2d(Q) - q0
        return -f(Q)[:, None] * d / w2

    def D2f(Q):
        d = np.atleast_2d(Q) - q0
        n = d.shape[1]
        outer = np.einsum("mi,mj->mij", d, d) / w2**2
        return f(Q)[:, None, None] * (outer - np.eye(n) / w2)

    return ScalarField(label=f"bump(w={width:g})", f=f, Df=Df, D2f=D2f)


# ---------------------------------------------------------------------------
# pointwise building blocks


def _field_data(fields, u):
    """Derived quantities of u against the metric and the potential."""
    Q = fields.Q
    uval = np.asarray(u.f(Q), dtype=float)
    Du = np.asarray(u.Df(Q), dtype=float)
    D2u = np.asarray(u.D2f(Q), dtype=float)
    Ginv = fields.metric_inv
    grad_u = np.einsum("mab,mb->ma", Ginv, Du)  # chart components of grad u
    grad_sq = np.einsum("ma,ma->m", Du, grad_u)
    lap_u = fields.laplacian_of(D2u, Du)
    return uval, Du, grad_u, grad_sq, lap_u


def _hess_h_energy(fields, grad_u, grad_sq):
    """Hess h(grad u, grad u) = |grad u|^2 + (w.nu) S(grad u, grad u)."""
    s_term = np.einsum("ma,mab,mb->m", grad_u, fields.shape_mat, grad_u)
    return grad_sq + fields.normal_component * fields.r * s_term


def _grad_h_dot(fields, grad_u):
    """g(grad h, grad u) = (dF^T w) . grad u (chart contraction)."""
    dh = np.einsum("mia,mi->ma", fields.dF, fields.offset)
    return np.einsum("ma,ma->m", dh, grad_u)


def hessian_min_eig(fields):
    """Smallest eigenvalue of Hess h in a g-orthonormal frame."""
    return np.linalg.eigvalsh(fields.dist_hessian).min(axis=1)


# ---------------------------------------------------------------------------
# the identity


@dataclass(frozen=True)
class BallDomain:
    """Extrinsic ball {r_tilde(., center) <= radius} as integration domain."""

    center: object  # BasePoint
    radius: float


@dataclass(frozen=True)
class ChartRectDomain:
    """The whole truncated chart; boundary = chart rectangle edges."""


@dataclass(frozen=True)
class IdentityReport:
    lhs_terms: tuple  # (growth, hessian, defect) domain integrals
    rhs_terms: tuple  # (potential flux, cross flux) boundary integrals
    residual: float
    domain: str
    level: int
    clip_frac: float

    @property
    def lhs(self):
        return sum(self.lhs_terms)

    @property
    def rhs(self):
        return sum(self.rhs_terms)


def _volume_terms(fields, u, lam, h_fields=None):
    """Integrand stack for the three domain-side terms."""
    h = fields if h_fields is None else h_fields
    uval, Du, grad_u, grad_sq, lap_u = _field_data(fields, u)
    lap_h = fields.imm.n + h.normal_component * h.r * np.einsum(
        "mab,mba->m", fields.metric_inv, h.shape_mat
    )
    t1 = (grad_sq - lam * uval**2) * lap_h
    t2 = -2.0 * _hess_h_energy(h, grad_u, grad_sq)
    t3 = -2.0 * (lap_u + lam * uval) * _grad_h_dot(h, grad_u)
    return np.stack([t1, t2, t3], axis=1)


def _sphere_terms(fields, u, lam):
    """Integrand stack for the two boundary terms on {r_tilde = r}."""
    uval, Du, grad_u, grad_sq, lap_u = _field_data(fields, u)
    dh_dn = fields.r * fields.grad_norm
    du_dn = np.einsum("ma,ma->m", Du, fields.dist_grad_chart) / fields.grad_norm
    b1 = (grad_sq - lam * uval**2) * dh_dn
    b2 = -2.0 * _grad_h_dot(fields, grad_u) * du_dn
    return np.stack([b1, b2], axis=1)


def _rect_boundary_terms(imm, base, u, lam, per_edge):
    """Boundary integrals over the chart rectangle with outward conormal."""
    dom = imm.chart_domain
    if dom.kind != "rectangle":
        raise ValueError("rectangle boundary integration needs a rectangle chart")
    (u0, u1), (v0, v1) = dom.bounds
    periodic = dom.periodic or (False, False)
    total = np.zeros(2)
    edges = []
    ts = (np.arange(per_edge) + 0.5) / per_edge
    if not periodic[0]:
        edges.append((np.stack([np.full(per_edge, u0), v0 + (v1 - v0) * ts], 1),
                      np.array([-1.0, 0.0]), (v1 - v0) / per_edge, 1))
        edges.append((np.stack([np.full(per_edge, u1), v0 + (v1 - v0) * ts], 1),
                      np.array([1.0, 0.0]), (v1 - v0) / per_edge, 1))
    if not periodic[1]:
        edges.append((np.stack([u0 + (u1 - u0) * ts, np.full(per_edge, v0)], 1),
                      np.array([0.0, -1.0]), (u1 - u0) / per_edge, 0))
        edges.append((np.stack([u0 + (u1 - u0) * ts, np.full(per_edge, v1)], 1),
                      np.array([0.0, 1.0]), (u1 - u0) / per_edge, 0))
    for Q, out_covec, dt, tang_axis in edges:
        f = SurfaceFields(imm, Q, base=base)
        uval, Du, grad_u, grad_sq, lap_u = _field_data(f, u)
        Ginv = f.metric_inv
        n_chart = np.einsum("mab,b->ma", Ginv, out_covec)
        n_norm = np.sqrt(np.einsum("a,mab,b->m", out_covec, Ginv, out_covec))
        n_chart /= n_norm[:, None]
        dh = np.einsum("mia,mi->ma", f.dF, f.offset)
        dh_dn = np.einsum("ma,ma->m", dh, n_chart)
        du_dn = np.einsum("ma,ma->m", Du, n_chart)
        tau = np.zeros(2)
        tau[tang_axis] = 1.0
        ds = np.sqrt(np.einsum("a,mab,b->m", tau, f.metric, tau)) * dt
        b1 = (grad_sq - lam * uval**2) * dh_dn
        b2 = -2.0 * _grad_h_dot(f, grad_u) * du_dn
        total += np.array([(b1 * ds).sum(), (b2 * ds).sum()])
    return total


def identity_residual(
    imm,
    domain,
    u,
    h_base,
    lam,
    *,
    level=3,
    rtol=1e-9,
    clip_frac=1.0 / 64.0,
    boundary_clip=1.0 / 128.0,
    per_edge=2048,
):
    """Evaluate both sides of the potential identity on one domain.

    `domain` is a BallDomain (extrinsic ball around its own center, with
    boundary integrals on the level set) or ChartRectDomain (the whole
    chart, with boundary integrals on the rectangle edges; the chart
    must be a rectangle).  The potential base may differ from the ball
    center.
    """
    if isinstance(domain, BallDomain):
        desc = f"ball(r={domain.radius:g})"
        same = domain.center is h_base or np.allclose(
            np.asarray(domain.center.ambient_point, dtype=float),
            np.asarray(h_base.ambient_point, dtype=float),
        )
        h_for = None if same else h_base

        def vol_integrand(f):
            hf = f if h_for is None else SurfaceFields(imm, f.Q, base=h_for)
            return _volume_terms(f, u, lam, h_fields=hf)

        lhs = region_integral(
            imm, domain.center, 0.0, domain.radius, vol_integrand,
            level=level, rtol=rtol, clip_frac=clip_frac,
        )
        if h_for is None:
            rhs = np.array([
                level_set_integral(
                    imm, domain.center, domain.radius,
                    lambda f: _sphere_terms(f, u, lam)[:, j],
                    level=level, clip_frac=boundary_clip, check_truncation=False,
                )
                for j in range(2)
            ])
        else:
            def bterms(f, j):
                hf = SurfaceFields(imm, f.Q, base=h_for)
                uval, Du, grad_u, grad_sq, _ = _field_data(f, u)
                dh = np.einsum("mia,mi->ma", hf.dF, hf.offset)
                n_chart = f.dist_grad_chart / f.grad_norm[:, None]
                dh_dn = np.einsum("ma,ma->m", dh, n_chart)
                du_dn = np.einsum("ma,ma->m", Du, n_chart)
                b1 = (grad_sq - lam * uval**2) * dh_dn
                b2 = -2.0 * _grad_h_dot(hf, grad_u) * du_dn
                return b1 if j == 0 else b2

            rhs = np.array([
                level_set_integral(
                    imm, domain.center, domain.radius,
                    lambda f, j=j: bterms(f, j),
                    level=level, clip_frac=boundary_clip, check_truncation=False,
                )
                for j in range(2)
            ])
    elif isinstance(domain, ChartRectDomain):
        desc = "chart"
        lhs = domain_integral(
            imm, lambda f: _volume_terms(f, u, lam), base=h_base,
            level=level, rtol=rtol,
        )
        rhs = _rect_boundary_terms(imm, h_base, u, lam, per_edge)
    else:
        raise TypeError("domain must be BallDomain or ChartRectDomain")

    lhs = np.asarray(lhs)
    residual = float(abs(lhs.sum() - rhs.sum()))
    return IdentityReport(
        lhs_terms=tuple(lhs.tolist()),
        rhs_terms=tuple(rhs.tolist()),
        residual=residual,
        domain=desc,
        level=level,
        clip_frac=clip_frac,
    )


# ---------------------------------------------------------------------------
# sparse radii


@dataclass(frozen=True)
class SparseSequence:
    t: np.ndarray
    products: np.ndarray  # t_i * phi(t_i)
    thresholds: np.ndarray
    complete: bool  # every requested threshold was met inside the range


def sparse_sequence(phi, t_lo, t_hi, *, count=8, samples=4096):
    """Radii t_i with t_i * phi(t_i) under geometrically shrinking caps.

    First checks integrability of phi over [t_lo, t_hi] by dyadic-block
    trapezoid sums: if the block integrals do not decay, the premise of
    the selection fails and NotIntegrableError is raised.
    """
    if not (0 < t_lo < t_hi):
        raise ValueError("need 0 < t_lo < t_hi")
    grid = np.geomspace(t_lo, t_hi, samples)
    vals = np.asarray([float(phi(t)) for t in grid])
    if np.any(vals < -1e-12):
        raise ValueError("phi must be nonnegative")
    vals = np.maximum(vals, 0.0)

    n_blocks = max(3, int(math.floor(math.log2(t_hi / t_lo))))
    bounds = t_lo * 2.0 ** np.arange(n_blocks + 1)
    bounds[-1] = min(bounds[-1], t_hi)
    blocks = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        m = (grid >= lo) & (grid <= hi)
        if m.sum() >= 2:
            g, v = grid[m], vals[m]
            blocks.append(float(0.5 * ((v[1:] + v[:-1]) * np.diff(g)).sum()))
        else:
            blocks.append(0.0)
    blocks = np.asarray(blocks)
    peak = blocks.max()
    # The decay test is a proxy for integrability toward infinity; it
    # needs a few octaves of range before it can say anything.
    if peak > 0 and len(blocks) >= 5:
        tail = blocks[-3:]
        if tail.mean() > 0.25 * peak:
            raise NotIntegrableError(
                "dyadic block integrals do not decay; phi looks non-integrable"
            )

    products = grid * vals
    t0 = max(products.max(), 1e-300)
    thresholds = t0 * 0.5 ** np.arange(1, count + 1)
    chosen, chosen_prod = [], []
    start = 0
    for thr in thresholds:
        idx = np.nonzero(products[start:] <= thr)[0]
        if len(idx) == 0:
            break
        j = start + idx[0]
        chosen.append(grid[j])
        chosen_prod.append(products[j])
        start = j + 1
        if start >= samples:
            break
    return SparseSequence(
        t=np.asarray(chosen),
        products=np.asarray(chosen_prod),
        thresholds=thresholds[: len(chosen)],
        complete=len(chosen) == count,
    )


# ---------------------------------------------------------------------------
# eigenvalue-absence audit


@dataclass(frozen=True)
class AbsenceAudit:
    min_eig: float
    min_eig_witness: tuple  # (chart point, value) at the sampled minimum
    strict_witness: tuple | None  # (chart point, value) with eig > tol
    convexity_verdict: str
    energy_radii: np.ndarray
    energy_values: np.ndarray  # int_ball Hess h(grad u, grad u)
    boundary_radii: np.ndarray
    bt_mass: np.ndarray  # (n/2) int d(u^2)/dn
    bt_potential: np.ndarray  # -int (|grad u|^2 - lam u^2) dh/dn
    bt_cross: np.ndarray  # +2 int g(grad h, grad u) du/dn
    eq_gap: np.ndarray  # 2 E(r) - (bt1 + bt2 + bt3): zero iff u solves the PDE
    verdict: str
    resolution: dict = field(default_factory=dict)


def absence_audit(
    imm,
    base,
    u,
    lam,
    radii,
    *,
    per_axis=201,
    level=3,
    rtol=1e-8,
    boundary_clip=1.0 / 128.0,
    strict_tol=1e-6,
):
    """Three-part audit of the convexity obstruction to L2 eigenfunctions.

    (i) sampled minimum eigenvalue of Hess h (nonnegative with a strict
    witness certifies the convexity hypothesis at this base); (ii) the
    Hessian energy of u over growing balls (bounded away from zero for
    any candidate with nonvanishing gradient); (iii) the boundary terms
    whose combination equals twice that energy when u solves the
    eigenvalue equation -- along radii where they could all vanish only
    if the energy did too.
    """
    radii = np.asarray(radii, dtype=float)
    grid = imm.chart_domain.sample_grid(per_axis)
    f = SurfaceFields(imm, grid, base=base)
    eigs = hessian_min_eig(f)
    jmin = int(np.argmin(eigs))
    min_eig = float(eigs[jmin])
    min_eig_witness = (tuple(grid[jmin]), min_eig)
    strict = eigs > strict_tol
    strict_witness = None
    if strict.any():
        js = int(np.argmax(eigs))
        strict_witness = (tuple(grid[js]), float(eigs[js]))
    if min_eig >= -1e-9 and strict_witness is not None:
        convexity = "nonnegative with strict witness"
        verdict = _VERDICT_CONSISTENT
    elif min_eig >= -1e-9:
        convexity = "nonnegative"
        verdict = _VERDICT_CONSISTENT
    else:
        convexity = "indefinite"
        verdict = _VERDICT_FAILS

    def energy(fields):
        _, _, grad_u, grad_sq, _ = _field_data(fields, u)
        return _hess_h_energy(fields, grad_u, grad_sq)

    energy_vals = np.array([
        region_integral(imm, base, 0.0, r, energy, level=level, rtol=rtol)
        for r in radii
    ])

    n = imm.n
    bt1 = np.empty(len(radii))
    bt2 = np.empty(len(radii))
    bt3 = np.empty(len(radii))
    for i, r in enumerate(radii):
        def terms(fields):
            uval, Du, grad_u, grad_sq, _ = _field_data(fields, u)
            du_dn = (
                np.einsum("ma,ma->m", Du, fields.dist_grad_chart)
                / fields.grad_norm
            )
            dh_dn = fields.r * fields.grad_norm
            one = n * uval * du_dn
            two = -(grad_sq - lam * uval**2) * dh_dn
            three = 2.0 * _grad_h_dot(fields, grad_u) * du_dn
            return np.stack([one, two, three], axis=1)

        out = np.array([
            level_set_integral(
                imm, base, r, lambda fld, j=j: terms(fld)[:, j],
                level=level, clip_frac=boundary_clip,
            )
            for j in range(3)
        ])
        bt1[i], bt2[i], bt3[i] = out

    eq_gap = 2.0 * energy_vals - (bt1 + bt2 + bt3)
    return AbsenceAudit(
        min_eig=min_eig,
        min_eig_witness=min_eig_witness,
        strict_witness=strict_witness,
        convexity_verdict=convexity,
        energy_radii=radii,
        energy_values=energy_vals,
        boundary_radii=radii,
        bt_mass=bt1,
        bt_potential=bt2,
        bt_cross=bt3,
        eq_gap=eq_gap,
        verdict=verdict,
        resolution={"per_axis": per_axis, "level": level},
    )
