"""Adaptive clipped-cell quadrature over extrinsic-distance regions.

Regions are sets {r_lo <= r <= r_hi} where r is the extrinsic distance
to a base point.  Chart cells are classified with certified bounds
(sampled r plus a Lipschitz slack from the chart differential), cells
crossing a level set are subdivided until their distance variation is
small, and the leftover cut cells are integrated over a polygon clipped
by the linearized level set.  Smooth cells are refined by comparing a
tensor Gauss rule against its four-way split.

Disk charts are integrated in polar coordinates, so circles centered at
the chart origin are resolved exactly.
"""

from __future__ import annotations

import warnings
from types import SimpleNamespace

import numpy as np

from .errors import QuadratureFailureError, TruncationTooSmallError, TruncatedDomainWarning
from .geometry import SurfaceFields

# 3-point Gauss-Legendre on [0, 1]
_GX = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_GW = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])

# 3x3 classification lattice offsets (corners, edge midpoints, center)
_L1 = np.array([0.0, 0.5, 1.0])
_LAT = np.stack(np.meshgrid(_L1, _L1, indexing="ij"), axis=-1).reshape(9, 2)
_IDX_CENTER = 4
_IDX_U0, _IDX_U1 = 1, 7  # (u=0, v=.5), (u=1, v=.5)
_IDX_V0, _IDX_V1 = 3, 5  # (u=.5, v=0), (u=.5, v=1)

_HARD_DEPTH_CAP = 26
_SMOOTH_DEPTH_CAP = 14
_LIP_SAFETY = 1.5


def _chart_map(imm):
    """Integration rectangle, chart map, Jacobian and measure factor."""
    dom = imm.chart_domain
    if dom.kind == "disk":
        if imm.n != 2:
            raise QuadratureFailureError("quadrature implemented for 2-d charts")
        R = dom.radius

        def to_chart(UV):
            rho, phi = UV[:, 0], UV[:, 1]
            return np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=1)

        def jac(UV):
            rho, phi = UV[:, 0], UV[:, 1]
            c, s = np.cos(phi), np.sin(phi)
            J = np.empty((UV.shape[0], 2, 2))
            J[:, 0, 0] = c
            J[:, 1, 0] = s
            J[:, 0, 1] = -rho * s
            J[:, 1, 1] = rho * c
            return J

        return SimpleNamespace(
            rect=((0.0, R), (0.0, 2 * np.pi)),
            to_chart=to_chart,
            jac=jac,
            factor=lambda UV: UV[:, 0].copy(),
        )
    if len(dom.bounds) != 2:
        raise QuadratureFailureError("quadrature implemented for 2-d charts")
    return SimpleNamespace(
        rect=tuple((float(lo), float(hi)) for lo, hi in dom.bounds),
        to_chart=lambda UV: UV,
        jac=lambda UV: np.broadcast_to(np.eye(2), (UV.shape[0], 2, 2)).copy(),
        factor=lambda UV: np.ones(UV.shape[0]),
    )


def _initial_cells(cmap, level):
    (u0, u1), (v0, v1) = cmap.rect
    nu = nv = max(4, 2**level)
    us = np.linspace(u0, u1, nu + 1)
    vs = np.linspace(v0, v1, nv + 1)
    cells = np.empty((nu * nv, 4))
    k = 0
    for i in range(nu):
        for j in range(nv):
            cells[k] = (us[i], us[i + 1], vs[j], vs[j + 1])
            k += 1
    return cells


def _split(cells):
    """Split each cell into four children."""
    u0, u1, v0, v1 = cells.T
    um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
    return np.concatenate(
        [
            np.stack([u0, um, v0, vm], axis=1),
            np.stack([um, u1, v0, vm], axis=1),
            np.stack([u0, um, vm, v1], axis=1),
            np.stack([um, u1, vm, v1], axis=1),
        ],
        axis=0,
    )


def _split_where(cells, ext_u, ext_v):
    """Split cells along the axes that drive their r-variation.

    An axis is halved when its Lipschitz extent is at least half the
    other's, so elongated cells are not over-refined along the short
    direction (the dominant cost for small regions on large charts).
    """
    split_u = ext_u >= 0.5 * ext_v
    split_v = ext_v >= 0.5 * ext_u
    neither = ~(split_u | split_v)
    split_u = split_u | neither
    split_v = split_v | neither
    out = []
    both = split_u & split_v
    if both.any():
        out.append(_split(cells[both]))
    only_u = split_u & ~split_v
    if only_u.any():
        u0, u1, v0, v1 = cells[only_u].T
        um = 0.5 * (u0 + u1)
        out.append(np.concatenate([
            np.stack([u0, um, v0, v1], axis=1),
            np.stack([um, u1, v0, v1], axis=1),
        ], axis=0))
    only_v = split_v & ~split_u
    if only_v.any():
        u0, u1, v0, v1 = cells[only_v].T
        vm = 0.5 * (v0 + v1)
        out.append(np.concatenate([
            np.stack([u0, u1, v0, vm], axis=1),
            np.stack([u0, u1, vm, v1], axis=1),
        ], axis=0))
    if not out:
        return np.empty((0, 4))
    return np.concatenate(out, axis=0)


def _lattice_points(cells):
    u0, u1, v0, v1 = cells.T
    du = (u1 - u0)[:, None]
    dv = (v1 - v0)[:, None]
    U = u0[:, None] + _LAT[None, :, 0] * du
    V = v0[:, None] + _LAT[None, :, 1] * dv
    return np.stack([U, V], axis=-1)  # (N, 9, 2)


def _r_and_lipschitz(imm, base, cells, cmap):
    """Certified per-cell bounds on r over each cell.

    Returns (rmin, rmax, r_lattice, grads) where grads has the central
    finite-difference gradient of r in integration coordinates.
    """
    N = cells.shape[0]
    UV = _lattice_points(cells).reshape(-1, 2)
    Q = cmap.to_chart(UV)
    f = SurfaceFields(imm, Q, base=base)
    r = f.r.reshape(N, 9)
    J = cmap.jac(UV)
    G = np.einsum("mia,mij,mjb->mab", J, f.metric, J).reshape(N, 9, 2, 2)
    Lu = np.sqrt(np.maximum(G[:, :, 0, 0], 0.0)).max(axis=1)
    Lv = np.sqrt(np.maximum(G[:, :, 1, 1], 0.0)).max(axis=1)
    du = cells[:, 1] - cells[:, 0]
    dv = cells[:, 3] - cells[:, 2]
    # any point of the cell is within (du/4, dv/4) of a lattice sample
    slack = _LIP_SAFETY * 0.25 * (Lu * du + Lv * dv)
    rmin = r.min(axis=1) - slack
    rmax = r.max(axis=1) + slack
    gu = (r[:, _IDX_U1] - r[:, _IDX_U0]) / du
    gv = (r[:, _IDX_V1] - r[:, _IDX_V0]) / dv
    exts = np.stack([Lu * du, Lv * dv], axis=1)
    return rmin, rmax, r, np.stack([gu, gv], axis=1), exts


def _gauss_eval(imm, base, cells, cmap, integrand, k):
    """Tensor 3x3 Gauss integral of integrand * area density per cell."""
    N = cells.shape[0]
    u0, u1, v0, v1 = cells.T
    du, dv = u1 - u0, v1 - v0
    U = u0[:, None] + _GX[None, :] * du[:, None]
    V = v0[:, None] + _GX[None, :] * dv[:, None]
    UV = np.stack(
        [
            np.repeat(U[:, :, None], 3, axis=2),
            np.repeat(V[:, None, :], 3, axis=1),
        ],
        axis=-1,
    ).reshape(-1, 2)
    W = np.tile((_GW[:, None] * _GW[None, :]).reshape(-1), N)
    Q = cmap.to_chart(UV)
    f = SurfaceFields(imm, Q, base=base)
    dens = f.sqrt_det_g * cmap.factor(UV)
    if integrand is None:
        vals = np.ones((UV.shape[0], 1))
    else:
        vals = np.asarray(integrand(f), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
    contrib = (vals * (dens * W)[:, None]).reshape(N, 9, k)
    return contrib.sum(axis=1) * ((du * dv)[:, None])


def _integrand_width(integrand, imm, base, cmap):
    if integrand is None:
        return 1
    (u0, u1), (v0, v1) = cmap.rect
    UV = np.array([[0.5 * (u0 + u1), 0.5 * (v0 + v1)]])
    f = SurfaceFields(imm, cmap.to_chart(UV), base=base)
    probe = np.asarray(integrand(f), dtype=float)
    return 1 if probe.ndim == 1 else probe.shape[-1]


def _smooth_integrate(imm, base, cells, cmap, integrand, k, rtol):
    """Refine smooth cells by Gauss-vs-split comparison until converged."""
    acc = np.zeros(k)
    depth = np.zeros(cells.shape[0], dtype=int)
    while cells.shape[0]:
        coarse = _gauss_eval(imm, base, cells, cmap, integrand, k)
        kids = _split(cells)
        fine_kids = _gauss_eval(imm, base, kids, cmap, integrand, k)
        N = cells.shape[0]
        fine = (
            fine_kids[:N] + fine_kids[N : 2 * N] + fine_kids[2 * N : 3 * N] + fine_kids[3 * N :]
        )
        err = np.abs(fine - coarse)
        tol = rtol * np.abs(fine) + 1e-300
        ok = np.all(err <= tol, axis=1) | (depth >= _SMOOTH_DEPTH_CAP)
        acc += fine[ok].sum(axis=0)
        bad = ~ok
        cells = kids[np.tile(bad, 4)]
        depth = np.tile(depth[bad] + 1, 4)
    return acc


def _clip_polygon(poly, signed):
    """Sutherland-Hodgman clip of polygon by {signed >= 0} (scalar fn)."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        sp, sq = signed(p), signed(q)
        if sp >= 0:
            out.append(p)
            if sq < 0:
                t = sp / (sp - sq)
                out.append(p + t * (q - p))
        elif sq >= 0:
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return out


def _clipped_cells_rule(cells, r_lattice, grads, r_lo, r_hi):
    """Midpoint-edge triangle rule nodes/weights on clipped cell polygons."""
    nodes, weights = [], []
    for c in range(cells.shape[0]):
        u0, u1, v0, v1 = cells[c]
        uc, vc = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
        rc = r_lattice[c, _IDX_CENTER]
        gu, gv = grads[c]

        def rlin(p):
            return rc + gu * (p[0] - uc) + gv * (p[1] - vc)

        poly = [np.array([u0, v0]), np.array([u1, v0]), np.array([u1, v1]), np.array([u0, v1])]
        if r_lo > 0.0:
            poly = _clip_polygon(poly, lambda p: rlin(p) - r_lo)
        if poly and np.isfinite(r_hi):
            poly = _clip_polygon(poly, lambda p: r_hi - rlin(p))
        if len(poly) < 3:
            continue
        p0 = poly[0]
        for i in range(1, len(poly) - 1):
            a, b = poly[i], poly[i + 1]
            area = 0.5 * abs((a[0] - p0[0]) * (b[1] - p0[1]) - (b[0] - p0[0]) * (a[1] - p0[1]))
            if area <= 0.0:
                continue
            mids = [0.5 * (p0 + a), 0.5 * (a + b), 0.5 * (b + p0)]
            for mpt in mids:
                nodes.append(mpt)
                weights.append(area / 3.0)
    if not nodes:
        return np.zeros((0, 2)), np.zeros(0)
    return np.asarray(nodes), np.asarray(weights)


def check_region_fits(imm, r_hi, base, per_edge=512):
    """Raise/warn when {r <= r_hi} provably reaches the chart boundary."""
    bd = imm.chart_domain.boundary_samples(per_edge)
    if bd.shape[0] == 0:
        return
    f = SurfaceFields(imm, bd, base=base)
    rb = float(f.r.min())
    if rb < r_hi * (1.0 - 1e-9):
        raise TruncationTooSmallError(
            f"region r <= {r_hi:g} exits the chart (boundary reaches r = {rb:g})"
        )
    if rb < r_hi * 1.02:
        warnings.warn(
            f"region r <= {r_hi:g} comes within 2% of the chart boundary",
            TruncatedDomainWarning,
            stacklevel=3,
        )


def region_integral(
    imm,
    base,
    r_lo,
    r_hi,
    integrand=None,
    *,
    level=3,
    rtol=1e-8,
    clip_frac=1.0 / 64.0,
    check_truncation=True,
):
    """Integral of `integrand` (default 1) over {r_lo <= r <= r_hi}.

    `integrand(fields) -> (m,) or (m, k)` receives a SurfaceFields batch.
    Returns a scalar for scalar integrands, else an array of length k.
    """
    if not 0.0 <= r_lo < r_hi:
        raise ValueError("need 0 <= r_lo < r_hi")
    if check_truncation and np.isfinite(r_hi):
        check_region_fits(imm, r_hi, base)
    cmap = _chart_map(imm)
    k = _integrand_width(integrand, imm, base, cmap)
    scale = r_hi if np.isfinite(r_hi) else max(r_lo, 1.0)
    target_var = max(scale * clip_frac, 1e-14)

    cells = _initial_cells(cmap, level)
    smooth = []
    final_cut = []
    depth = 0
    while cells.shape[0] and depth <= _HARD_DEPTH_CAP:
        rmin, rmax, rlat, grads, exts = _r_and_lipschitz(imm, base, cells, cmap)
        inside = (rmin >= r_lo) & (rmax <= r_hi)
        outside = (rmax < r_lo) | (rmin > r_hi)
        cut = ~(inside | outside)
        small = rmax - rmin <= target_var
        stop = cut & (small | (depth == _HARD_DEPTH_CAP))
        if inside.any():
            smooth.append(cells[inside])
        if stop.any():
            final_cut.append((cells[stop], rlat[stop], grads[stop]))
        todo = cut & ~stop
        cells = _split_where(cells[todo], exts[todo, 0], exts[todo, 1])
        depth += 1

    acc = np.zeros(k)
    if smooth:
        acc += _smooth_integrate(imm, base, np.concatenate(smooth), cmap, integrand, k, rtol)
    if final_cut:
        cut_cells = np.concatenate([fc[0] for fc in final_cut])
        cut_rlat = np.concatenate([fc[1] for fc in final_cut])
        cut_grads = np.concatenate([fc[2] for fc in final_cut])
        nodes, weights = _clipped_cells_rule(cut_cells, cut_rlat, cut_grads, r_lo, r_hi)
        if nodes.shape[0]:
            Q = cmap.to_chart(nodes)
            f = SurfaceFields(imm, Q, base=base)
            dens = f.sqrt_det_g * cmap.factor(nodes)
            vals = np.ones((nodes.shape[0], 1)) if integrand is None else np.asarray(
                integrand(f), dtype=float
            )
            if vals.ndim == 1:
                vals = vals[:, None]
            acc += (vals * (dens * weights)[:, None]).sum(axis=0)
    return float(acc[0]) if k == 1 else acc


def ball_volume(imm, base, r, *, level=3, rtol=1e-8, clip_frac=1.0 / 64.0, check_truncation=True):
    """Volume of the extrinsic ball {r_tilde <= r} inside the chart."""
    return region_integral(
        imm, base, 0.0, float(r), None,
        level=level, rtol=rtol, clip_frac=clip_frac, check_truncation=check_truncation,
    )


def annulus_volume(imm, base, r_lo, r_hi, **kw):
    """Volume of the extrinsic annulus {r_lo <= r_tilde <= r_hi}."""
    return region_integral(imm, base, float(r_lo), float(r_hi), None, **kw)


def domain_integral(imm, integrand=None, *, base=None, level=3, rtol=1e-8):
    """Integral of `integrand` over the whole truncated chart."""
    cmap = _chart_map(imm)
    k = _integrand_width(integrand, imm, base, cmap)
    cells = _initial_cells(cmap, level)
    acc = _smooth_integrate(imm, base, cells, cmap, integrand, k, rtol)
    return float(acc[0]) if k == 1 else acc


def level_set_integral(
    imm,
    base,
    r,
    integrand,
    *,
    level=3,
    clip_frac=1.0 / 128.0,
    check_truncation=True,
):
    """Line integral of `integrand` over the level set {r_tilde = r}.

    The level set is approximated per leaf cell by the chord of the
    sampled distance field; each chord carries a 3-point Gauss rule with
    the embedded length element.
    """
    r = float(r)
    if check_truncation:
        check_region_fits(imm, r, base)
    cmap = _chart_map(imm)
    target_var = max(r * clip_frac, 1e-14)

    cells = _initial_cells(cmap, level)
    segs = []
    depth = 0
    while cells.shape[0] and depth <= _HARD_DEPTH_CAP:
        rmin, rmax, rlat, grads, _ = _r_and_lipschitz(imm, base, cells, cmap)
        cut = (rmin <= r) & (rmax >= r)
        small = (rmax - rmin <= target_var) | (depth == _HARD_DEPTH_CAP)
        stop = cut & small
        if stop.any():
            segs.append((cells[stop], rlat[stop]))
        cells = _split(cells[cut & ~stop])
        depth += 1

    pts, dirs, wts = [], [], []
    corner_idx = [0, 6, 8, 2]  # cell corners in cyclic order
    for cell_arr, rlat in segs:
        for c in range(cell_arr.shape[0]):
            u0, u1, v0, v1 = cell_arr[c]
            corners = np.array([[u0, v0], [u1, v0], [u1, v1], [u0, v1]])
            vals = rlat[c, corner_idx] - r
            crossings = []
            for i in range(4):
                a, b = vals[i], vals[(i + 1) % 4]
                if (a <= 0 < b) or (b <= 0 < a):
                    t = a / (a - b)
                    crossings.append(corners[i] + t * (corners[(i + 1) % 4] - corners[i]))
            if len(crossings) != 2:
                continue  # tangency or saddle below resolution
            p0, p1 = crossings
            d = p1 - p0
            for gx, gw in zip(_GX, _GW):
                pts.append(p0 + gx * d)
                dirs.append(d)
                wts.append(gw)
    if not pts:
        return 0.0
    UV = np.asarray(pts)
    D = np.asarray(dirs)
    W = np.asarray(wts)
    Q = cmap.to_chart(UV)
    f = SurfaceFields(imm, Q, base=base)
    J = cmap.jac(UV)
    T = np.einsum("mia,mab,mb->mi", f.dF, J, D)
    ds = np.linalg.norm(T, axis=1)
    vals = np.asarray(integrand(f), dtype=float)
    return float(np.sum(vals * ds * W))


def region_sup(imm, base, r_lo, r_hi, func, *, per_axis=241):
    """Sampled supremum of func(fields) over {r_lo <= r_tilde <= r_hi}."""
    grid = imm.chart_domain.sample_grid(per_axis, imm.n)
    f = SurfaceFields(imm, grid, base=base)
    mask = (f.r >= r_lo) & (f.r <= r_hi)
    if not mask.any():
        raise QuadratureFailureError("no chart samples fall inside the requested region")
    sub = SurfaceFields(imm, grid[mask], base=base)
    return float(np.max(np.asarray(func(sub))))
