"""Pointwise geometry of immersed hypersurfaces in Euclidean space.

An immersion is a chart map F from an open subset of R^n into R^{n+1},
supplied together with its first and second derivatives.  All evaluators
are vectorized: a batch of m chart points has shape (m, n) and

    F(Q)   -> (m, n+1)
    dF(Q)  -> (m, n+1, n)
    d2F(Q) -> (m, n+1, n, n)

The extrinsic distance to a fixed ambient base point a is
r(y) = |F(y) - a|, and h = r^2 / 2 is the associated squared-distance
potential whose Hessian drives every audit in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BaseCoincidesError, RankDeficientError

_RANK_RTOL = 1e-10
_COINCIDE_TOL = 1e-12


@dataclass(frozen=True)
class ChartDomain:
    """Parameter domain of a chart: an axis-aligned rectangle or a disk.

    Rectangles carry per-axis bounds and optional periodic flags (a
    periodic axis is identified end to end, e.g. the angular coordinate
    of a catenoid chart).  Disk domains are centered at the origin and
    described by a single radius.
    """

    kind: str  # "rectangle" | "disk"
    bounds: tuple = ()  # rectangle: ((lo, hi), ...); disk: (radius,)
    periodic: tuple = ()  # rectangle only, one bool per axis

    def __post_init__(self):
        if self.kind not in ("rectangle", "disk"):
            raise ValueError(f"unknown chart domain kind {self.kind!r}")
        if self.kind == "disk" and len(self.bounds) != 1:
            raise ValueError("disk domain takes a single radius bound")

    @property
    def dim(self):
        if self.kind == "disk":
            return None  # dimension comes from the immersion
        return len(self.bounds)

    @property
    def radius(self):
        if self.kind != "disk":
            raise ValueError("radius only defined for disk domains")
        return float(self.bounds[0])

    def contains(self, q, margin=0.0):
        q = np.asarray(q, dtype=float)
        if self.kind == "disk":
            return np.linalg.norm(q, axis=-1) <= self.radius - margin
        ok = np.ones(q.shape[:-1], dtype=bool)
        for ax, (lo, hi) in enumerate(self.bounds):
            if self.periodic and self.periodic[ax]:
                continue
            ok &= (q[..., ax] >= lo + margin) & (q[..., ax] <= hi - margin)
        return ok

    def sample_grid(self, per_axis, n=None):
        """Deterministic grid of chart points covering the domain.

        The grid includes the domain center (rectangle midpoints use an
        odd point count), so symmetric extrema such as a catenoid neck
        are always sampled exactly.
        """
        if self.kind == "disk":
            if n is None:
                n = 2
            r = self.radius
            if n != 2:
                # axis grid intersected with the ball
                axes = [np.linspace(-r, r, per_axis)] * n
                grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
                pts = grid.reshape(-1, n)
                return pts[np.linalg.norm(pts, axis=1) <= r * (1 - 1e-9)]
            per_axis += 1 - per_axis % 2
            rho = np.linspace(0.0, r * (1 - 1e-9), per_axis)
            phi = np.linspace(0.0, 2 * np.pi, per_axis, endpoint=False)
            R, P = np.meshgrid(rho, phi, indexing="ij")
            pts = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1).reshape(-1, 2)
            return np.unique(pts, axis=0)
        axes = []
        for ax, (lo, hi) in enumerate(self.bounds):
            count = per_axis + 1 - per_axis % 2
            if self.periodic and self.periodic[ax]:
                axes.append(np.linspace(lo, hi, count, endpoint=False))
            else:
                pad = 1e-9 * (hi - lo)
                axes.append(np.linspace(lo + pad, hi - pad, count))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return grid.reshape(-1, len(self.bounds))

    def boundary_samples(self, per_edge=256):
        """Chart points along the non-periodic part of the boundary."""
        if self.kind == "disk":
            phi = np.linspace(0.0, 2 * np.pi, per_edge, endpoint=False)
            r = self.radius
            return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
        segs = []
        for ax, (lo, hi) in enumerate(self.bounds):
            if self.periodic and self.periodic[ax]:
                continue
            others = []
            for bx, (blo, bhi) in enumerate(self.bounds):
                if bx == ax:
                    continue
                if self.periodic and self.periodic[bx]:
                    others.append(np.linspace(blo, bhi, per_edge, endpoint=False))
                else:
                    others.append(np.linspace(blo, bhi, per_edge))
            if not others:
                others = [np.zeros(1)]
            mesh = np.meshgrid(*others, indexing="ij")
            flat = [m.reshape(-1) for m in mesh]
            for val in (lo, hi):
                pts = np.zeros((flat[0].size, len(self.bounds)))
                pts[:, ax] = val
                k = 0
                for bx in range(len(self.bounds)):
                    if bx == ax:
                        continue
                    pts[:, bx] = flat[k]
                    k += 1
                segs.append(pts)
        if not segs:
            return np.zeros((0, len(self.bounds)))
        return np.concatenate(segs, axis=0)


@dataclass
class Immersion:
    """Chart-based hypersurface immersion with vectorized evaluators."""

    n: int
    chart_domain: ChartDomain
    F: callable
    dF: callable = None
    d2F: callable = None
    analytic: bool = True
    label: str = ""

    def __post_init__(self):
        if self.dF is None or self.d2F is None:
            self.analytic = False
            F = self.F
            dF_user = self.dF

            def fd_dF(Q):
                return _fd_jacobian(F, np.asarray(Q, dtype=float))

            dF = dF_user if dF_user is not None else fd_dF

            def fd_d2F(Q):
                return _fd_jacobian(dF, np.asarray(Q, dtype=float))

            if self.dF is None:
                self.dF = fd_dF
            if self.d2F is None:
                self.d2F = fd_d2F

    @property
    def ambient_dim(self):
        return self.n + 1

    def scaled(self, c):
        """Homothety c * F of the same chart (c > 0)."""
        c = float(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        F, dF, d2F = self.F, self.dF, self.d2F
        return Immersion(
            n=self.n,
            chart_domain=self.chart_domain,
            F=lambda Q: c * F(Q),
            dF=lambda Q: c * dF(Q),
            d2F=lambda Q: c * d2F(Q),
            analytic=self.analytic,
            label=f"{self.label}*{c:g}" if self.label else f"scaled*{c:g}",
        )


def _fd_jacobian(fn, Q):
    """Central finite differences of a vectorized evaluator along chart axes."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    m, n = Q.shape
    h = 1e-5 * (1.0 + np.linalg.norm(Q, axis=1))
    cols = []
    for i in range(n):
        step = np.zeros_like(Q)
        step[:, i] = h
        diff = np.asarray(fn(Q + step)) - np.asarray(fn(Q - step))
        denom = (2.0 * h).reshape((m,) + (1,) * (diff.ndim - 1))
        cols.append(diff / denom)
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class BasePoint:
    """Ambient base point for extrinsic distances.

    Any point of R^{n+1} is allowed; when the point lies on the surface
    its chart coordinates are recorded so small-radius diagnostics can
    anchor there.
    """

    ambient_point: np.ndarray
    chart_coords: np.ndarray = None
    label: str = ""

    @property
    def on_surface(self):
        return self.chart_coords is not None

    @staticmethod
    def origin(ambient_dim, label="origin"):
        return BasePoint(np.zeros(ambient_dim), label=label or "origin")

    @staticmethod
    def ambient(point, label=""):
        return BasePoint(np.asarray(point, dtype=float), label=label)

    @staticmethod
    def at_chart(imm, q, label=""):
        q = np.asarray(q, dtype=float)
        p = np.asarray(imm.F(q[None, :]))[0]
        return BasePoint(p, chart_coords=q, label=label)


class SurfaceFields:
    """Lazily evaluated geometric fields at a batch of chart points.

    Everything downstream (frames, curvature, extrinsic calculus,
    quadrature integrands) pulls from this bundle so each derivative of
    F is evaluated at most once per batch.
    """

    def __init__(self, imm, Q, base=None):
        self.imm = imm
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.base = base

    @cached_property
    def F(self):
        return np.asarray(self.imm.F(self.Q), dtype=float)

    @cached_property
    def dF(self):
        return np.asarray(self.imm.dF(self.Q), dtype=float)

    @cached_property
    def d2F(self):
        return np.asarray(self.imm.d2F(self.Q), dtype=float)

    @cached_property
    def metric(self):
        dF = self.dF
        return np.einsum("mia,mib->mab", dF, dF)

    @cached_property
    def chol(self):
        return np.linalg.cholesky(self.metric)

    @cached_property
    def sqrt_det_g(self):
        d = np.diagonal(self.chol, axis1=-2, axis2=-1)
        return np.prod(d, axis=-1)

    @cached_property
    def chol_inv(self):
        return np.linalg.inv(self.chol)

    @cached_property
    def metric_inv(self):
        Li = self.chol_inv
        return np.einsum("mka,mkb->mab", Li, Li)

    @cached_property
    def normal(self):
        """Unit normal with orientation det([dF | nu]) > 0."""
        dF = self.dF
        m, amb, n = dF.shape
        if amb == 3 and n == 2:
            # cross product of the chart frame is already oriented
            nu = np.cross(dF[:, :, 0], dF[:, :, 1], axis=1)
            return nu / np.linalg.norm(nu, axis=1, keepdims=True)
        # Left-singular vector outside the column span.
        U = np.linalg.svd(dF, full_matrices=True)[0]
        nu = U[:, :, -1]
        stacked = np.concatenate([dF, nu[:, :, None]], axis=2)
        sign = np.sign(np.linalg.det(stacked))
        sign[sign == 0.0] = 1.0
        return nu * sign[:, None]

    @cached_property
    def singular_values(self):
        return np.linalg.svd(self.dF, compute_uv=False)

    @cached_property
    def shape_mat(self):
        """Second fundamental form against the unit normal, chart basis."""
        return np.einsum("miab,mi->mab", self.d2F, self.normal)

    @cached_property
    def shape_whitened(self):
        """Shape operator in a g-orthonormal frame (symmetric)."""
        Li = self.chol_inv
        S = self.shape_mat
        W = np.einsum("mia,mij,mjb->mab", Li, S, Li)
        return 0.5 * (W + np.swapaxes(W, -1, -2))

    @cached_property
    def principal_curvatures(self):
        return np.linalg.eigvalsh(self.shape_whitened)

    @cached_property
    def mean_curvature(self):
        tr = np.trace(self.shape_whitened, axis1=-2, axis2=-1)
        return tr / self.imm.n

    @cached_property
    def second_form_norm_sq(self):
        """|A|^2, squared Frobenius norm of the second fundamental form."""
        W = self.shape_whitened
        return np.einsum("mab,mab->m", W, W)

    # ---- base-point dependent fields ----

    def _need_base(self):
        if self.base is None:
            raise ValueError("field requires a base point")

    @cached_property
    def offset(self):
        """F(y) - a."""
        self._need_base()
        return self.F - np.asarray(self.base.ambient_point, dtype=float)

    @cached_property
    def r(self):
        return np.linalg.norm(self.offset, axis=-1)

    @cached_property
    def normal_component(self):
        """dr(nu) = <F - a, nu> / r (continuous extension 0 at r = 0)."""
        nc = np.einsum("mi,mi->m", self.offset, self.normal)
        with np.errstate(invalid="ignore"):
            out = nc / self.r
        return np.where(self.r > 0.0, out, 0.0)

    @cached_property
    def tangential_offset(self):
        nc = np.einsum("mi,mi->m", self.offset, self.normal)
        return self.offset - nc[:, None] * self.normal

    @cached_property
    def grad_norm(self):
        """|grad r| from the tangential projection of F - a (limit 1 at r = 0)."""
        with np.errstate(invalid="ignore"):
            gn = np.linalg.norm(self.tangential_offset, axis=-1) / self.r
        return np.where(self.r > 0.0, np.minimum(gn, 1.0), 1.0)

    @cached_property
    def laplacian_r(self):
        """Laplacian of the extrinsic distance on a minimal immersion."""
        n = self.imm.n
        t2 = np.einsum("mi,mi->m", self.tangential_offset, self.tangential_offset)
        return n / self.r - t2 / self.r**3

    @cached_property
    def dist_hessian(self):
        """Hessian of h = r^2/2 in a g-orthonormal frame: I + <F-a, nu> S."""
        nc = np.einsum("mi,mi->m", self.offset, self.normal)
        m, n = self.Q.shape
        return np.eye(n)[None, :, :] + nc[:, None, None] * self.shape_whitened

    @cached_property
    def dist_grad_chart(self):
        """Chart components of grad r (contravariant)."""
        dr_cov = np.einsum("mia,mi->ma", self.dF, self.offset) / self.r[:, None]
        return np.einsum("mab,mb->ma", self.metric_inv, dr_cov)

    @cached_property
    def potential_grad_chart(self):
        """Chart components of grad h, h = r^2/2."""
        dh_cov = np.einsum("mia,mi->ma", self.dF, self.offset)
        return np.einsum("mab,mb->ma", self.metric_inv, dh_cov)

    @cached_property
    def contracted_d2F(self):
        """g^{ij} d2F_{ij}, used in chart Laplacians of scalar fields."""
        return np.einsum("mab,miab->mi", self.metric_inv, self.d2F)

    def laplacian_of(self, values_D2, values_D):
        """Laplace-Beltrami of a chart scalar from its chart derivatives.

        values_D2: (m, n, n) chart Hessian, values_D: (m, n) chart gradient.
        """
        ginv = self.metric_inv
        flat = np.einsum("mab,mab->m", ginv, values_D2)
        V = self.contracted_d2F
        # Tangential correction: Gamma^k_ij g^ij contracted with the gradient.
        corr = np.einsum("mi,mia,mab,mb->m", V, self.dF, ginv, values_D)
        return flat - corr


@dataclass(frozen=True)
class PointFrame:
    """First and second order frame data at a single chart point."""

    q: np.ndarray
    point: np.ndarray
    metric: np.ndarray
    normal: np.ndarray
    shape: np.ndarray
    principal_curvatures: np.ndarray
    mean_curvature: float
    sqrt_det_g: float


@dataclass(frozen=True)
class ExtrinsicCalc:
    """Extrinsic-distance calculus at a single point for a fixed base."""

    r: float
    grad_norm: float
    normal_component: float
    laplacian_r: float
    hess_h: np.ndarray  # in a g-orthonormal frame


def fields(imm, Q, base=None):
    """Bundle of lazily evaluated geometric fields at chart points Q."""
    return SurfaceFields(imm, Q, base=base)


def point_frame(imm, q):
    """Metric, unit normal, shape operator and curvatures at one point."""
    f = SurfaceFields(imm, np.asarray(q, dtype=float)[None, :])
    sv = f.singular_values[0]
    if sv[-1] <= _RANK_RTOL * sv[0]:
        raise RankDeficientError(
            f"chart differential rank deficient at q={np.asarray(q).tolist()}"
        )
    return PointFrame(
        q=f.Q[0],
        point=f.F[0],
        metric=f.metric[0],
        normal=f.normal[0],
        shape=f.shape_mat[0],
        principal_curvatures=f.principal_curvatures[0],
        mean_curvature=float(f.mean_curvature[0]),
        sqrt_det_g=float(f.sqrt_det_g[0]),
    )


def extrinsic_calculus(imm, base, q):
    """Distance, gradient norm, normal component, Laplacian and Hessian.

    The gradient norm comes from the tangential projection of F - a, so
    the identity 1 - |grad r|^2 = dr(nu)^2 is a genuine cross-check and
    not a restatement of the implementation.
    """
    f = SurfaceFields(imm, np.asarray(q, dtype=float)[None, :], base=base)
    if f.r[0] < _COINCIDE_TOL:
        raise BaseCoincidesError("base point coincides with the surface point")
    return ExtrinsicCalc(
        r=float(f.r[0]),
        grad_norm=float(f.grad_norm[0]),
        normal_component=float(f.normal_component[0]),
        laplacian_r=float(f.laplacian_r[0]),
        hess_h=f.dist_hessian[0],
    )


def hessian_h_quadratic(imm, base, q, X):
    """Quadratic form Hess h(X, X) for a chart-basis vector X.

    Hess h(X, X) = g(X, X) + <A(X, X), F - a>; summing over a
    g-orthonormal frame recovers the trace identity (= n on minimal
    surfaces).
    """
    q = np.asarray(q, dtype=float)
    X = np.asarray(X, dtype=float)
    f = SurfaceFields(imm, q[None, :], base=base)
    if f.r[0] < _COINCIDE_TOL:
        raise BaseCoincidesError("base point coincides with the surface point")
    gXX = float(X @ f.metric[0] @ X)
    SXX = float(X @ f.shape_mat[0] @ X)
    nc = float(np.dot(f.offset[0], f.normal[0]))
    return gXX + SXX * nc
