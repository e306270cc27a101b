"""Catalog of chart-based hypersurfaces used throughout the package.

Supported kinds: the flat plane, graphs of user functions, the catenoid
and the helicoid.  Each catalog entry carries closed-form first and
second derivatives so downstream audits run at machine precision; user
graphs may fall back to finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedKindError
from .geometry import ChartDomain, Immersion, SurfaceFields

_DEFAULT_RADIUS = 48.0
_DEFAULT_T_MAX = 6.5
_DEFAULT_RHO_MAX = 8.0
_DEFAULT_THETA_MAX = float(np.pi)


@dataclass
class GraphFunctionSpec:
    """Scalar function over an n-dimensional chart with derivatives.

    f(Q) -> (m,), Df(Q) -> (m, n), D2f(Q) -> (m, n, n); missing
    derivative evaluators are replaced by finite differences when the
    immersion is built.
    """

    label: str
    n: int
    f: callable
    Df: callable = None
    D2f: callable = None


@dataclass
class SurfaceSpec:
    """Declarative description of a catalog surface plus its truncation."""

    kind: str
    n: int = 2
    neck_radius: float = 1.0
    pitch: float = 1.0
    graph: GraphFunctionSpec | str = None
    truncation: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind in ("catenoid", "helicoid") and self.n != 2:
            raise ValueError(f"{self.kind} chart is two dimensional")
        if self.neck_radius <= 0:
            raise ValueError("neck_radius must be positive")
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        for key, val in self.truncation.items():
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"truncation {key} must be positive and finite")

    def to_dict(self):
        d = {"kind": self.kind, "n": self.n, "truncation": dict(self.truncation)}
        if self.kind == "catenoid":
            d["neck_radius"] = self.neck_radius
        if self.kind == "helicoid":
            d["pitch"] = self.pitch
        if self.kind == "graph":
            d["graph"] = self.graph if isinstance(self.graph, str) else self.graph.label
        return d

    @staticmethod
    def from_dict(d):
        return SurfaceSpec(
            kind=d["kind"],
            n=int(d.get("n", 2)),
            neck_radius=float(d.get("neck_radius", 1.0)),
            pitch=float(d.get("pitch", 1.0)),
            graph=d.get("graph"),
            truncation=dict(d.get("truncation", {})),
        )


# ---------------------------------------------------------------------------
# builtin graph functions


def _zero_graph(n):
    return GraphFunctionSpec(
        label="zero",
        n=n,
        f=lambda Q: np.zeros(np.atleast_2d(Q).shape[0]),
        Df=lambda Q: np.zeros(np.atleast_2d(Q).shape),
        D2f=lambda Q: np.zeros(np.atleast_2d(Q).shape + (n,)),
    )


def _linear_graph(n, slope=None):
    a = np.zeros(n)
    a[0] = 1.0
    if slope is not None:
        a = np.asarray(slope, dtype=float)

    def f(Q):
        return np.atleast_2d(Q) @ a

    def Df(Q):
        Q = np.atleast_2d(Q)
        return np.broadcast_to(a, Q.shape).copy()

    def D2f(Q):
        Q = np.atleast_2d(Q)
        return np.zeros(Q.shape + (n,))

    return GraphFunctionSpec(label="linear", n=n, f=f, Df=Df, D2f=D2f)


def _half_square_graph(n):
    """f = q_1^2 / 2, a curved non-minimal control with residual 1 at 0."""

    def f(Q):
        return 0.5 * np.atleast_2d(Q)[:, 0] ** 2

    def Df(Q):
        Q = np.atleast_2d(Q)
        out = np.zeros_like(Q)
        out[:, 0] = Q[:, 0]
        return out

    def D2f(Q):
        Q = np.atleast_2d(Q)
        out = np.zeros(Q.shape + (n,))
        out[:, 0, 0] = 1.0
        return out

    return GraphFunctionSpec(label="half_square", n=n, f=f, Df=Df, D2f=D2f)


def _cubic_graph(n):
    """f = q_1^3, a non-minimal control whose normal never aligns fast."""

    def f(Q):
        return np.atleast_2d(Q)[:, 0] ** 3

    def Df(Q):
        Q = np.atleast_2d(Q)
        out = np.zeros_like(Q)
        out[:, 0] = 3.0 * Q[:, 0] ** 2
        return out

    def D2f(Q):
        Q = np.atleast_2d(Q)
        out = np.zeros(Q.shape + (n,))
        out[:, 0, 0] = 6.0 * Q[:, 0]
        return out

    return GraphFunctionSpec(label="cubic", n=n, f=f, Df=Df, D2f=D2f)


BUILTIN_GRAPHS = {
    "zero": _zero_graph,
    "linear": _linear_graph,
    "half_square": _half_square_graph,
    "cubic": _cubic_graph,
}


def graph_function(name, n=2, **kwargs):
    if name not in BUILTIN_GRAPHS:
        raise UnsupportedKindError(f"unknown builtin graph {name!r}")
    return BUILTIN_GRAPHS[name](n, **kwargs)


# ---------------------------------------------------------------------------
# immersion builders


def _graph_immersion(gf, radius, label):
    n = gf.n

    def F(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        return np.concatenate([Q, np.asarray(gf.f(Q))[:, None]], axis=1)

    dF = d2F = None
    if gf.Df is not None:

        def dF(Q):
            Q = np.atleast_2d(np.asarray(Q, dtype=float))
            m = Q.shape[0]
            out = np.zeros((m, n + 1, n))
            out[:, :n, :] = np.eye(n)
            out[:, n, :] = gf.Df(Q)
            return out

    if gf.D2f is not None:

        def d2F(Q):
            Q = np.atleast_2d(np.asarray(Q, dtype=float))
            m = Q.shape[0]
            out = np.zeros((m, n + 1, n, n))
            out[:, n, :, :] = gf.D2f(Q)
            return out

    domain = ChartDomain("disk", (float(radius),))
    return Immersion(n=n, chart_domain=domain, F=F, dF=dF, d2F=d2F, label=label)


def _catenoid_immersion(c, t_max):
    c = float(c)

    def F(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        t, th = Q[:, 0], Q[:, 1]
        ch = c * np.cosh(t / c)
        return np.stack([ch * np.cos(th), ch * np.sin(th), t], axis=1)

    def dF(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        t, th = Q[:, 0], Q[:, 1]
        sh, ch = np.sinh(t / c), np.cosh(t / c)
        cth, sth = np.cos(th), np.sin(th)
        out = np.zeros((Q.shape[0], 3, 2))
        out[:, 0, 0] = sh * cth
        out[:, 1, 0] = sh * sth
        out[:, 2, 0] = 1.0
        out[:, 0, 1] = -c * ch * sth
        out[:, 1, 1] = c * ch * cth
        return out

    def d2F(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        t, th = Q[:, 0], Q[:, 1]
        sh, ch = np.sinh(t / c), np.cosh(t / c)
        cth, sth = np.cos(th), np.sin(th)
        out = np.zeros((Q.shape[0], 3, 2, 2))
        out[:, 0, 0, 0] = ch * cth / c
        out[:, 1, 0, 0] = ch * sth / c
        out[:, 0, 0, 1] = out[:, 0, 1, 0] = -sh * sth
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = sh * cth
        out[:, 0, 1, 1] = -c * ch * cth
        out[:, 1, 1, 1] = -c * ch * sth
        return out

    domain = ChartDomain(
        "rectangle",
        ((-float(t_max), float(t_max)), (0.0, 2 * np.pi)),
        periodic=(False, True),
    )
    return Immersion(n=2, chart_domain=domain, F=F, dF=dF, d2F=d2F, label=f"catenoid(c={c:g})")


def _helicoid_immersion(pitch, rho_max, theta_max):
    p = float(pitch)

    def F(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        rho, th = Q[:, 0], Q[:, 1]
        return np.stack([rho * np.cos(th), rho * np.sin(th), p * th], axis=1)

    def dF(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        rho, th = Q[:, 0], Q[:, 1]
        cth, sth = np.cos(th), np.sin(th)
        out = np.zeros((Q.shape[0], 3, 2))
        out[:, 0, 0] = cth
        out[:, 1, 0] = sth
        out[:, 0, 1] = -rho * sth
        out[:, 1, 1] = rho * cth
        out[:, 2, 1] = p
        return out

    def d2F(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        rho, th = Q[:, 0], Q[:, 1]
        cth, sth = np.cos(th), np.sin(th)
        out = np.zeros((Q.shape[0], 3, 2, 2))
        out[:, 0, 0, 1] = out[:, 0, 1, 0] = -sth
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = cth
        out[:, 0, 1, 1] = -rho * cth
        out[:, 1, 1, 1] = -rho * sth
        return out

    domain = ChartDomain(
        "rectangle",
        ((-float(rho_max), float(rho_max)), (-float(theta_max), float(theta_max))),
        periodic=(False, False),
    )
    return Immersion(n=2, chart_domain=domain, F=F, dF=dF, d2F=d2F, label=f"helicoid(p={p:g})")


def make_immersion(spec):
    """Build the immersion described by a SurfaceSpec."""
    if spec.kind == "plane":
        radius = spec.truncation.get("radius", _DEFAULT_RADIUS)
        return _graph_immersion(_zero_graph(spec.n), radius, f"plane(n={spec.n})")
    if spec.kind == "graph":
        gf = spec.graph
        if isinstance(gf, str) or gf is None:
            gf = graph_function(gf or "zero", spec.n)
        radius = spec.truncation.get("radius", _DEFAULT_RADIUS)
        return _graph_immersion(gf, radius, f"graph({gf.label})")
    if spec.kind == "catenoid":
        t_max = spec.truncation.get("t_max", _DEFAULT_T_MAX)
        return _catenoid_immersion(spec.neck_radius, t_max)
    if spec.kind == "helicoid":
        rho_max = spec.truncation.get("rho_max", _DEFAULT_RHO_MAX)
        theta_max = spec.truncation.get("theta_max", _DEFAULT_THETA_MAX)
        return _helicoid_immersion(spec.pitch, rho_max, theta_max)
    raise UnsupportedKindError(f"unknown surface kind {spec.kind!r}")


def graph_spec_of(spec):
    """GraphFunctionSpec of a plane/graph surface, None otherwise."""
    if spec.kind == "plane":
        return _zero_graph(spec.n)
    if spec.kind == "graph":
        gf = spec.graph
        if isinstance(gf, str) or gf is None:
            gf = graph_function(gf or "zero", spec.n)
        return gf
    return None


def minimality_residual(spec, samples):
    """Pointwise defect of the minimal surface equation.

    Graphs use the divergence form div(Df / sqrt(1 + |Df|^2)); other
    kinds evaluate n * mean curvature from the point frame.  At a
    critical point of a graph the residual reduces to the flat
    Laplacian of f.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    imm = make_immersion(spec)
    gf = graph_spec_of(spec)
    if gf is not None and gf.Df is not None and gf.D2f is not None:
        Df = np.asarray(gf.Df(samples))
        D2f = np.asarray(gf.D2f(samples))
        W2 = 1.0 + np.einsum("ma,ma->m", Df, Df)
        lap = np.trace(D2f, axis1=-2, axis2=-1)
        bend = np.einsum("ma,mab,mb->m", Df, D2f, Df)
        return np.abs((lap - bend / W2) / np.sqrt(W2))
    f = SurfaceFields(imm, samples)
    return np.abs(spec.n * f.mean_curvature)


@dataclass(frozen=True)
class InequalityReport:
    """Margins of the catenoid calibration inequalities on a t-grid."""

    t: np.ndarray
    margin_upper: np.ndarray  # sinh(t) cosh(t) - t  >= 0
    margin_lower: np.ndarray  # t cosh(t) - sinh(t)  >= 0
    holds: bool
    strict_away_from_zero: bool


def catenoid_inequalities(t_grid):
    """Check t <= sinh(t)cosh(t) and sinh(t) <= t cosh(t) on |t| grid.

    Both inequalities are sharp exactly at t = 0; they control the
    product of extrinsic distance and principal curvature on the
    catenoid.
    """
    t = np.abs(np.asarray(t_grid, dtype=float))
    m_up = np.sinh(t) * np.cosh(t) - t
    m_lo = t * np.cosh(t) - np.sinh(t)
    holds = bool(np.all(m_up >= -1e-14) and np.all(m_lo >= -1e-14))
    nonzero = t > 1e-8
    strict = bool(np.all(m_up[nonzero] > 0) and np.all(m_lo[nonzero] > 0))
    return InequalityReport(
        t=t, margin_upper=m_up, margin_lower=m_lo, holds=holds,
        strict_away_from_zero=strict,
    )
