"""Doubly rotational minimal graphs over R^{2m}.

The classical higher-dimensional graphs live over R^{2m} = R^m x R^m
and depend only on the two block radii u, v.  This module packages the
exponent bookkeeping (p, delta, alpha, the admissible lambda window),
the explicit sub/super barriers f1, f2 with their profile integral P,
a symmetry-reduced solver for the minimal surface equation on quarter
disks, and a probe of the normal alignment dr(nu) along shells of the
computed graph.  The 2m-dimensional problem reduces to two variables
through the O(m) x O(m) symmetry; the weight (uv)^{m-1} below is the
orbit-volume factor of that reduction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.sparse
import scipy.sparse.linalg

from .errors import InvalidParamsError, NewtonDivergedError, QuadratureFailureError

__all__ = [
    "BdggParams",
    "ReducedSolution",
    "AlignmentProbe",
    "params",
    "f1",
    "f1_uv",
    "f2",
    "f2_uv",
    "profile_integral",
    "P",
    "solve_reduced_mse",
    "control_solution",
    "normal_alignment_probe",
]


@dataclass(frozen=True)
class BdggParams:
    """Exponents and constants of the doubly rotational construction.

    alpha here is the growth exponent of the barriers (the graph grows
    like |x|^{2 alpha}); lam is the barrier-shape parameter chosen
    inside lambda_range, unrelated to any spectral quantity.  B and D
    are the "sufficiently large" constants of the construction; they
    are configuration, defaulting to 10.
    """

    m: int
    p: int
    delta: float
    alpha: float
    lambda_range: tuple
    lam: float
    B: float = 10.0
    D: float = 10.0
    valid: bool = True


def params(m, *, B=10.0, D=10.0, lam=None):
    """Exponent package for half-dimension m (graphs over R^{2m})."""
    m = int(m)
    if m < 2:
        raise ValueError("need m >= 2")
    p = m - 1
    delta = float(4 * p**2 - 12 * p + 1)
    if delta < 0.0:
        return BdggParams(
            m=m, p=p, delta=delta, alpha=float("nan"),
            lambda_range=(float("nan"), float("nan")), lam=float("nan"),
            B=float(B), D=float(D), valid=False,
        )
    alpha = (2 * p + 1 - math.sqrt(delta)) / 4.0
    lo = alpha * (2 * p + 1) / (2 * p + 2)
    hi = min(alpha, p / alpha**2)
    valid = m >= 4 and lo < hi and alpha > 1.0
    if lam is None:
        lam = 0.5 * (lo + hi)
    lam = float(lam)
    if valid and not (lo < lam < hi):
        raise ValueError(f"lam must lie in ({lo:g}, {hi:g})")
    return BdggParams(
        m=m, p=p, delta=delta, alpha=alpha, lambda_range=(lo, hi),
        lam=lam, B=float(B), D=float(D), valid=valid,
    )


def _require_valid(par):
    if not par.valid:
        raise InvalidParamsError(
            f"parameters for m={par.m} are not valid (delta={par.delta:g})"
        )


def _split_blocks(x, m):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != 2 * m:
        raise ValueError(f"points must live in R^{2 * m}")
    u = np.linalg.norm(x[..., :m], axis=-1)
    v = np.linalg.norm(x[..., m:], axis=-1)
    return u, v


def f1_uv(u, v, par):
    """Lower barrier in block radii: (u^2 - v^2)(u^2 + v^2)^{alpha-1}."""
    _require_valid(par)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    s = u**2 + v**2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (u**2 - v**2) * s ** (par.alpha - 1.0)
    return np.where(s > 0.0, out, 0.0)


def f1(x, par):
    """Lower barrier on ambient points of R^{2m}."""
    u, v = _split_blocks(x, par.m)
    return f1_uv(u, v, par)


def _quad(fn, a, b, epsabs):
    """scipy quad with subdivision exhaustion mapped to a typed error."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
        try:
            return scipy.integrate.quad(fn, a, b, epsabs=epsabs, limit=200)
        except scipy.integrate.IntegrationWarning as exc:
            raise QuadratureFailureError(
                f"quadrature on [{a:g}, {b:g}] did not converge: {exc}"
            ) from exc


def profile_integral(w, par):
    """Inner tail integral int_w^inf t^{lam-2} / (1 + t^{2 alpha (lam-1)}) dt."""
    _require_valid(par)
    lam, alpha = par.lam, par.alpha
    expo = 2.0 * alpha * (lam - 1.0)
    lm1 = lam - 1.0

    def rest(t):
        return 1.0 / (1.0 + t**expo)

    w = float(abs(w))
    total = 0.0
    if w < 1.0:
        # substitute s = t^{lam-1}: t^{lam-2} dt = ds / (lam-1), which
        # removes the integrable endpoint singularity at t = 0
        val, _ = _quad(lambda s: rest(s ** (1.0 / lm1)), w**lm1, 1.0,
                       epsabs=5e-11 * lm1)
        total += val / lm1
        w = 1.0
    val, _ = _quad(lambda t: t ** (lam - 2.0) * rest(t), w, np.inf, epsabs=5e-11)
    return total + val


def P(z, par):
    """Profile P(z) = int_0^z exp(B * inner(|w|)) dw; odd and increasing."""
    _require_valid(par)
    z = float(z)
    if z == 0.0:
        return 0.0
    sign, a = math.copysign(1.0, z), abs(z)
    B, lm1 = par.B, par.lam - 1.0

    def g(w):
        return math.exp(B * profile_integral(w, par))

    split = min(a, 0.5)
    # near 0 the integrand behaves like exp(c - c' w^{lam-1}); the same
    # power substitution as in the inner integral smooths it out
    val, _ = _quad(
        lambda s: g(s ** (1.0 / lm1)) * s ** ((1.0 - lm1) / lm1),
        0.0, split**lm1, epsabs=1e-8 * lm1,
    )
    total = val / lm1
    if split < a:
        val, _ = _quad(g, split, a, epsabs=1e-8)
        total += val
    return sign * total


def _f2_argument(u, v, par):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    s = u**2 + v**2
    diff = u**2 - v**2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(diff) / s
    ratio = np.where(s > 0.0, ratio, 0.0)
    return diff + f1_uv(u, v, par) * (1.0 + par.D * ratio ** (par.lam - 1.0))


def f2_uv(u, v, par):
    """Upper barrier: P applied to the shifted lower barrier."""
    _require_valid(par)
    arg = np.asarray(_f2_argument(u, v, par))
    flat = arg.reshape(-1)
    out = np.array([P(z, par) for z in flat])
    return out.reshape(arg.shape) if arg.shape else float(out[0])


def f2(x, par):
    u, v = _split_blocks(x, par.m)
    return f2_uv(u, v, par)


# ---------------------------------------------------------------------------
# symmetry-reduced minimal surface solver


@dataclass(frozen=True)
class ReducedSolution:
    """Discrete graph over the quarter disk {u, v >= 0, u^2+v^2 <= R^2}."""

    par: BdggParams
    R: float
    nodes: np.ndarray  # (N, 2) block radii (u, v)
    values: np.ndarray  # (N,) nodal f
    triangles: np.ndarray  # (T, 3) node indices
    fixed: np.ndarray  # boolean mask of Dirichlet nodes
    residual_norm: float
    tolerance: float
    boundary_tag: str
    newton_iterations: int
    ordering: dict = field(default_factory=dict)
    gradient_report: dict = field(default_factory=dict)

    def diagonal_values(self):
        """Nodal values along u = v (exactly the mirror axis of the mesh)."""
        on_diag = np.isclose(self.nodes[:, 0], self.nodes[:, 1], rtol=0.0,
                             atol=1e-12 * max(self.R, 1.0))
        return self.values[on_diag]

    def mirror_asymmetry(self):
        """max |f(u,v) + f(v,u)| over grid nodes (0 for an odd solution)."""
        order = np.lexsort((self.nodes[:, 1], self.nodes[:, 0]))
        swapped = np.lexsort((self.nodes[:, 0], self.nodes[:, 1]))
        return float(np.max(np.abs(self.values[order] + self.values[swapped])))


def _quarter_mesh(R, nr, nphi):
    """Structured quarter-disk mesh, bitwise symmetric across u = v.

    nphi must be even so the diagonal is a grid line; angular diagonals
    mirror across it so the triangulation maps to itself under
    (u, v) -> (v, u).
    """
    if nphi % 2:
        raise ValueError("nphi must be even")
    phis = 0.5 * np.pi * np.arange(nphi + 1) / nphi
    cos, sin = np.cos(phis), np.sin(phis)
    # copy the lower half onto the upper half swapped, making the mesh
    # geometry mirror-symmetric to the last bit
    for j in range(nphi // 2 + 1, nphi + 1):
        cos[j] = sin[nphi - j]
        sin[j] = cos[nphi - j]
    rho = R * np.arange(1, nr + 1) / nr
    nodes = [np.zeros((1, 2))]
    for r in rho:
        nodes.append(np.stack([r * cos, r * sin], axis=1))
    nodes = np.concatenate(nodes, axis=0)

    def nid(i, j):  # ring i >= 1
        return 1 + (i - 1) * (nphi + 1) + j

    tris = []
    for j in range(nphi):
        tris.append((0, nid(1, j), nid(1, j + 1)))
    for i in range(1, nr):
        for j in range(nphi):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if j < nphi // 2:
                tris.extend([(a, b, c), (a, c, d)])
            else:
                tris.extend([(a, b, d), (b, c, d)])
    tris = np.asarray(tris, dtype=int)
    fixed = np.zeros(nodes.shape[0], dtype=bool)
    fixed[nid(nr, 0): nid(nr, nphi) + 1] = True
    return nodes, tris, fixed


def _p1_geometry(nodes, tris):
    X = nodes[tris]  # (T, 3, 2)
    e1 = X[:, 1] - X[:, 0]
    e2 = X[:, 2] - X[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * np.abs(det)
    # gradients of the three shape functions: J^{-T} times reference grads
    inv = np.empty((len(tris), 2, 2))
    inv[:, 0, 0] = e2[:, 1]
    inv[:, 0, 1] = -e2[:, 0]
    inv[:, 1, 0] = -e1[:, 1]
    inv[:, 1, 1] = e1[:, 0]
    inv /= det[:, None, None]
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.einsum("kb,tba->tka", ref, inv)
    centroid = X.mean(axis=1)
    return area, grads, centroid


def _weighted_residual(fvals, tris, area, grads, weight):
    gf = np.einsum("tk,tka->ta", fvals[tris], grads)
    W = np.sqrt(1.0 + np.einsum("ta,ta->t", gf, gf))
    coef = weight * area / W
    contrib = coef[:, None] * np.einsum("ta,tka->tk", gf, grads)
    out = np.zeros(len(fvals))
    np.add.at(out, tris, contrib)
    return out, gf, W


def _tangent_matrix(tris, area, grads, weight, gf, W, n_nodes):
    s = np.einsum("tka,ta->tk", grads, gf)  # grad(phi_k) . grad(f)
    gg = np.einsum("tka,tla->tkl", grads, grads)
    local = gg / W[:, None, None] - np.einsum("tk,tl->tkl", s, s) / (W**3)[:, None, None]
    local *= (weight * area)[:, None, None]
    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    return scipy.sparse.coo_matrix(
        (local.reshape(-1), (rows, cols)), shape=(n_nodes, n_nodes)
    ).tocsr()


def solve_reduced_mse(
    par,
    R,
    grid_resolution=24,
    *,
    newton_tol=1e-10,
    max_iter=60,
    ordering_samples=64,
):
    """Solve div((uv)^{m-1} grad f / W) = 0 on the quarter disk of radius R.

    Dirichlet data f1 on the arc, natural conditions on the axes (the
    orbit weight vanishes there), damped Newton on the P1 system with
    the exact tangent.  The energy is convex, so Newton with halving
    line search is robust; divergence raises NewtonDivergedError.
    """
    _require_valid(par)
    if R <= 0:
        raise ValueError("need R > 0")
    nr = int(grid_resolution)
    nphi = nr + (nr % 2)
    nodes, tris, fixed = _quarter_mesh(float(R), nr, nphi)
    area, grads, centroid = _p1_geometry(nodes, tris)
    weight = (centroid[:, 0] * centroid[:, 1]) ** (par.m - 1)

    f = np.asarray(f1_uv(nodes[:, 0], nodes[:, 1], par), dtype=float)
    free = ~fixed

    res, gf, W = _weighted_residual(f, tris, area, grads, weight)
    rnorm = float(np.linalg.norm(res[free]))
    tol = newton_tol * max(1.0, rnorm)
    iters = 0
    while rnorm > tol:
        if iters >= max_iter:
            raise NewtonDivergedError(
                f"residual {rnorm:g} above tolerance after {iters} iterations"
            )
        H = _tangent_matrix(tris, area, grads, weight, gf, W, len(f))
        Hff = H[free][:, free].tocsc()
        d = Hff.diagonal()
        scale = 1.0 / np.sqrt(d)
        Hs = Hff.multiply(scale[:, None]).multiply(scale[None, :]).tocsc()
        rhs = -res[free] * scale
        step = scipy.sparse.linalg.spsolve(Hs, rhs) * scale
        t = 1.0
        while True:
            trial = f.copy()
            trial[free] += t * step
            tres, tgf, tW = _weighted_residual(trial, tris, area, grads, weight)
            tnorm = float(np.linalg.norm(tres[free]))
            if tnorm < rnorm:
                f, res, gf, W, rnorm = trial, tres, tgf, tW, tnorm
                break
            t *= 0.5
            if t < 1e-14:
                raise NewtonDivergedError(
                    f"line search exhausted at residual {rnorm:g}"
                )
        iters += 1

    ordering = _ordering_report(par, nodes, f, fixed, ordering_samples)
    gradient = _gradient_report(par, float(R), centroid, gf)
    return ReducedSolution(
        par=par,
        R=float(R),
        nodes=nodes,
        values=f,
        triangles=tris,
        fixed=fixed,
        residual_norm=rnorm,
        tolerance=tol,
        boundary_tag="f1-on-arc",
        newton_iterations=iters,
        ordering=ordering,
        gradient_report=gradient,
    )


def _ordering_report(par, nodes, f, fixed, n_samples, tol=1e-3):
    """Soft check of |f1| <= |f| <= |f2| at interior nodes (reported only)."""
    interior = np.nonzero(~fixed)[0]
    rho = np.linalg.norm(nodes[interior], axis=1)
    keep = interior[rho > 1e-9]
    if len(keep) > n_samples:
        keep = keep[np.linspace(0, len(keep) - 1, n_samples).astype(int)]
    u, v = nodes[keep, 0], nodes[keep, 1]
    lower = np.abs(np.asarray(f1_uv(u, v, par)))
    upper = np.abs(np.asarray(f2_uv(u, v, par)))
    mid = np.abs(f[keep])
    scale = np.maximum(1.0, np.abs(upper))
    low_excess = (lower - mid) / scale
    high_excess = (mid - upper) / scale
    return {
        "samples": int(len(keep)),
        "tolerance": tol,
        "lower_violations": int(np.sum(low_excess > tol)),
        "upper_violations": int(np.sum(high_excess > tol)),
        "max_lower_excess": float(low_excess.max()) if len(keep) else 0.0,
        "max_upper_excess": float(high_excess.max()) if len(keep) else 0.0,
    }


def _gradient_report(par, R, centroid, gf):
    """max |Df| on B_h against the barrier argument sup_{B_2h}|f2| / (2h)."""
    h = 0.25 * R
    rho = np.linalg.norm(centroid, axis=1)
    grad_norm = np.linalg.norm(gf, axis=1)
    inner = rho <= h
    max_grad = float(grad_norm[inner].max()) if inner.any() else float("nan")
    two_h = rho <= 2.0 * h
    # P is odd and increasing, so sup |f2| = P(sup |argument|)
    args = np.abs(_f2_argument(centroid[two_h, 0], centroid[two_h, 1], par))
    sup_f2 = P(float(args.max()), par) if two_h.any() else float("nan")
    return {
        "h": h,
        "max_grad_inner": max_grad,
        "barrier_sup_over_2h": sup_f2 / (2.0 * h),
    }


def control_solution(fn, R, grid_resolution=16, par=None):
    """Gridded values of a closed-form f, for probes and tests (not solved)."""
    nr = int(grid_resolution)
    nphi = nr + (nr % 2)
    nodes, tris, fixed = _quarter_mesh(float(R), nr, nphi)
    vals = np.asarray(fn(nodes[:, 0], nodes[:, 1]), dtype=float)
    if par is None:
        par = params(4)
    return ReducedSolution(
        par=par, R=float(R), nodes=nodes, values=vals, triangles=tris,
        fixed=fixed, residual_norm=float("nan"), tolerance=float("nan"),
        boundary_tag="control", newton_iterations=0,
    )


# ---------------------------------------------------------------------------
# normal alignment probe


@dataclass(frozen=True)
class AlignmentProbe:
    """Shell bands of dr(nu) for a reduced graph; exploratory output only."""

    radii: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray


def normal_alignment_probe(solution, shell_radii, *, base=None, rel_window=0.08):
    """Band table of dr(nu) along extrinsic shells of the graph.

    The distance is measured from the ambient origin (the graph passes
    through it by oddness); dr(nu) = (f - u f_u - v f_v) / (r W) with
    the P1 gradient per triangle.  No verdict is attached: the output
    is the raw band table.
    """
    if base is not None:
        pt = np.asarray(getattr(base, "ambient_point", base), dtype=float)
        if np.any(pt != 0.0):
            raise ValueError("the alignment probe is defined at the ambient origin")
    nodes, tris, f = solution.nodes, solution.triangles, solution.values
    area, grads, centroid = _p1_geometry(nodes, tris)
    gf = np.einsum("tk,tka->ta", f[tris], grads)
    fc = f[tris].mean(axis=1)
    u, v = centroid[:, 0], centroid[:, 1]
    r = np.sqrt(u**2 + v**2 + fc**2)
    W = np.sqrt(1.0 + np.einsum("ta,ta->t", gf, gf))
    with np.errstate(invalid="ignore", divide="ignore"):
        align = (fc - u * gf[:, 0] - v * gf[:, 1]) / (r * W)
    align = np.where(r > 0.0, align, 0.0)

    radii = np.asarray(shell_radii, dtype=float)
    lower = np.full(len(radii), np.nan)
    upper = np.full(len(radii), np.nan)
    counts = np.zeros(len(radii), dtype=int)
    for i, rad in enumerate(radii):
        mask = np.abs(r - rad) <= rel_window * rad
        counts[i] = int(mask.sum())
        if counts[i]:
            lower[i] = float(align[mask].min())
            upper[i] = float(align[mask].max())
    return AlignmentProbe(radii=radii, lower=lower, upper=upper, counts=counts)
