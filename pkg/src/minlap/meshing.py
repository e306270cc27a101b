"""Triangle meshes of chart regions and P1 finite element assembly.

Meshes live in chart coordinates and are embedded through the immersion
only when matrices are assembled, so one mesh can serve a family of
rescaled surfaces.  Stiffness uses the cotangent weights of the
embedded triangles; mass is the consistent P1 matrix.

Extrinsic balls are meshed structurally: disk charts get a polar fan
around the base whose rays are clipped to the ball by bisection, and
periodic bands (catenoid charts) get a graded row grid between the two
level-set crossings of each angular column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateTriangleError, TruncationTooSmallError
from .geometry import SurfaceFields
from .quadrature import check_region_fits

_BISECT_ITERS = 80


@dataclass(frozen=True)
class TriMesh:
    """Triangulation in chart coordinates."""

    vertices: np.ndarray  # (V, 2) chart coordinates
    triangles: np.ndarray  # (T, 3) vertex indices, positively oriented

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def embedded(self, imm):
        """Ambient positions of the mesh vertices."""
        return imm.F(self.vertices)

    def boundary_vertices(self):
        """Indices of vertices on edges owned by a single triangle."""
        tri = self.triangles
        edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return np.unique(uniq[counts == 1])


@dataclass(frozen=True)
class FemPair:
    """Assembled P1 pencil (stiffness, consistent mass) on a mesh."""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix

    @property
    def dim(self):
        return self.stiffness.shape[0]


def _grid_mesh(u_vals, v_vals, periodic_v):
    """Structured split-quad triangulation of a (u, v) grid."""
    nu, nv = len(u_vals), len(v_vals)
    U, V = np.meshgrid(u_vals, v_vals, indexing="ij")
    verts = np.stack([U.ravel(), V.ravel()], axis=1)
    cols = nv

    def vid(i, j):
        return i * cols + (j % nv if periodic_v else j)

    tris = []
    jmax = nv if periodic_v else nv - 1
    for i in range(nu - 1):
        for j in range(jmax):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            # alternate the quad diagonal so the mesh has no global drift
            if (i + j) % 2 == 0:
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:
                tris.append((a, b, d))
                tris.append((b, c, d))
    return TriMesh(vertices=verts, triangles=np.asarray(tris, dtype=int))


def _disk_fan_mesh(rings):
    """Unit-disk fan: ring i carries 4i vertices, 1 + 2r(r+1) in total."""
    verts = [np.zeros(2)]
    ring_start = [None]
    for i in range(1, rings + 1):
        k = 4 * i
        ring_start.append(len(verts))
        phi = 2 * np.pi * np.arange(k) / k
        s = i / rings
        verts.extend(np.stack([s * np.cos(phi), s * np.sin(phi)], axis=1))
    tris = []
    # innermost fan
    for j in range(4):
        tris.append((0, 1 + j, 1 + (j + 1) % 4))
    # stitch ring i-1 (4(i-1) verts) to ring i (4i verts) by angle walk
    for i in range(2, rings + 1):
        a0, b0 = ring_start[i - 1], ring_start[i]
        na, nb = 4 * (i - 1), 4 * i
        ia = ib = 0
        while ia < na or ib < nb:
            pa, pb = a0 + ia % na, b0 + ib % nb
            ang_a = (ia + 1) / na
            ang_b = (ib + 1) / nb
            if ib < nb and (ia == na or ang_b <= ang_a):
                tris.append((pb, b0 + (ib + 1) % nb, pa))
                ib += 1
            else:
                tris.append((pa, pb, a0 + (ia + 1) % na))
                ia += 1
    return TriMesh(vertices=np.asarray(verts), triangles=np.asarray(tris, dtype=int))


def _orient(mesh):
    """Flip triangles to positive chart-area orientation."""
    v = mesh.vertices
    t = mesh.triangles.copy()
    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det == 0):
        raise DegenerateTriangleError("triangulation produced a zero-area chart triangle")
    flip = det < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return TriMesh(vertices=v, triangles=t)


def triangulate(imm, resolution):
    """Mesh the full truncated chart of an immersion.

    Disk charts get the growing-ring fan (1 + 2*res*(res+1) vertices),
    rectangle charts a split-quad grid with res rows and aspect-matched
    columns (wrapped along a periodic axis).
    """
    dom = imm.chart_domain
    if dom.kind == "disk":
        mesh = _disk_fan_mesh(resolution)
        return _orient(
            TriMesh(vertices=mesh.vertices * dom.radius, triangles=mesh.triangles)
        )
    (u0, u1), (v0, v1) = dom.bounds
    aspect = (v1 - v0) / (u1 - u0)
    cols = max(8, int(round(resolution * aspect)))
    periodic_v = bool(dom.periodic and dom.periodic[1])
    u_vals = np.linspace(u0, u1, resolution + 1)
    v_vals = (
        np.linspace(v0, v1, cols, endpoint=False)
        if periodic_v
        else np.linspace(v0, v1, cols + 1)
    )
    return _orient(_grid_mesh(u_vals, v_vals, periodic_v))


def _r_of(imm, base, Q):
    return SurfaceFields(imm, np.atleast_2d(Q), base=base).r


def _bisect_crossing(fn, lo, hi):
    """Root of fn along [lo, hi], elementwise, with fn(lo) <= 0 <= fn(hi)."""
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        neg = fn(mid) <= 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def ball_mesh(imm, base, r, resolution):
    """Structured mesh of the extrinsic ball {r_tilde <= r}.

    The region must be star shaped around the base point's chart
    position (disk charts) or around each angular column's distance
    minimum (periodic bands); all catalog surfaces with their natural
    base points satisfy this.
    """
    r = float(r)
    check_region_fits(imm, r, base, per_edge=256)
    dom = imm.chart_domain
    if dom.kind == "disk":
        q0 = np.zeros(2) if base.chart_coords is None else np.asarray(base.chart_coords)
        fan = _disk_fan_mesh(resolution)
        s = np.linalg.norm(fan.vertices, axis=1)
        phi = np.arctan2(fan.vertices[:, 1], fan.vertices[:, 0])
        units = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        # clip each ray to the ball by bisection on r_tilde - r
        smax = _max_ray_extent(dom, q0, units)

        def gap(sv):
            return _r_of(imm, base, q0[None, :] + sv[:, None] * units) - r

        if np.any(gap(np.zeros(len(units))) >= 0):
            raise TruncationTooSmallError("base point lies outside the requested ball")
        s_star = _bisect_crossing(gap, np.zeros(len(units)), smax)
        verts = q0[None, :] + (s * s_star)[:, None] * units
        verts[0] = q0
        return _orient(TriMesh(vertices=verts, triangles=fan.triangles))

    # periodic band: per angular column, bisect the two crossings in u
    (u0, u1), (v0, v1) = dom.bounds
    if not (dom.periodic and dom.periodic[1]):
        raise TruncationTooSmallError(
            "ball meshing supports disk charts and bands periodic in the second axis"
        )
    # row count graded with the band half-width so the embedded cells
    # keep a radius-independent shape (conformal charts)
    probe = _r_of(imm, base, np.stack([np.linspace(u0, u1, 129), np.full(129, v0)], axis=1))
    if probe.min() >= r:
        raise TruncationTooSmallError("ball does not meet the chart")
    cols = max(8, int(round(resolution * np.pi / max(1e-9, _band_halfwidth(imm, base, r, v0)))))
    thetas = np.linspace(v0, v1, cols, endpoint=False)
    grid = np.linspace(u0, u1, 257)
    lo_list, hi_list = [], []
    for th in thetas:
        col = np.stack([grid, np.full_like(grid, th)], axis=1)
        rr = _r_of(imm, base, col) - r
        k = int(np.argmin(rr))
        if rr[k] >= 0:
            raise TruncationTooSmallError("an angular column misses the ball")
        tlo = _bisect_crossing(
            lambda s: _r_of(imm, base, np.stack([s, np.full_like(s, th)], axis=1)) - r,
            np.array([grid[k]]),
            np.array([grid[0] if rr[0] > 0 else u0]),
        )[0]
        thi = _bisect_crossing(
            lambda s: _r_of(imm, base, np.stack([s, np.full_like(s, th)], axis=1)) - r,
            np.array([grid[k]]),
            np.array([grid[-1] if rr[-1] > 0 else u1]),
        )[0]
        lo_list.append(tlo)
        hi_list.append(thi)
    lo = np.asarray(lo_list)
    hi = np.asarray(hi_list)
    rows = resolution + 1
    frac = np.linspace(0.0, 1.0, rows)
    U = lo[None, :] + frac[:, None] * (hi - lo)[None, :]  # (rows, cols)
    V = np.broadcast_to(thetas, U.shape)
    verts = np.stack([U.ravel(), V.ravel()], axis=1)

    def vid(i, j):
        return i * cols + (j % cols)

    tris = []
    for i in range(rows - 1):
        for j in range(cols):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:
                tris.append((a, b, d))
                tris.append((b, c, d))
    return _orient(TriMesh(vertices=verts, triangles=np.asarray(tris, dtype=int)))


def _max_ray_extent(dom, q0, units):
    """Chart-exit parameter of each ray q0 + s*u inside a disk chart."""
    R = dom.radius * (1.0 - 1e-12)
    b = units @ q0
    c = q0 @ q0 - R * R
    disc = np.maximum(b * b - c, 0.0)
    return -b + np.sqrt(disc)


def _band_halfwidth(imm, base, r, theta0):
    grid = np.linspace(*imm.chart_domain.bounds[0], 513)
    col = np.stack([grid, np.full_like(grid, theta0)], axis=1)
    inside = _r_of(imm, base, col) <= r
    if not inside.any():
        return 1.0
    return max(1e-3, 0.5 * (grid[inside][-1] - grid[inside][0]))


def assemble(imm, mesh):
    """Cotangent stiffness and consistent mass on the embedded mesh."""
    P = mesh.embedded(imm)
    tri = mesh.triangles
    p0, p1, p2 = P[tri[:, 0]], P[tri[:, 1]], P[tri[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    area = 0.5 * np.linalg.norm(cross, axis=1)
    if np.any(area <= 0):
        raise DegenerateTriangleError("embedded triangle with zero area")

    def cot(a, b, c):
        u, v = b - a, c - a
        return np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)

    cot0 = cot(p0, p1, p2)
    cot1 = cot(p1, p2, p0)
    cot2 = cot(p2, p0, p1)

    i0, i1, i2 = tri[:, 0], tri[:, 1], tri[:, 2]
    rows, cols, vals = [], [], []

    def add(i, j, w):
        rows.append(i)
        cols.append(j)
        vals.append(w)

    for (a, b, w) in ((i1, i2, cot0), (i2, i0, cot1), (i0, i1, cot2)):
        half = 0.5 * w
        add(a, b, -half)
        add(b, a, -half)
        add(a, a, half)
        add(b, b, half)
    V = mesh.num_vertices
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(V, V)
    ).tocsr()

    rows, cols, vals = [], [], []
    for a in (i0, i1, i2):
        for b in (i0, i1, i2):
            rows.append(a)
            cols.append(b)
            vals.append(area * ((2.0 if a is b else 1.0) / 12.0))
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(V, V)
    ).tocsr()
    return FemPair(stiffness=K, mass=M)


def dirichlet_reduce(pair, mesh, boundary=None):
    """Restrict a pencil to interior vertices (zero Dirichlet data).

    Returns (reduced pair, interior index array).
    """
    if boundary is None:
        boundary = mesh.boundary_vertices()
    mask = np.ones(pair.dim, dtype=bool)
    mask[boundary] = False
    idx = np.nonzero(mask)[0]
    K = pair.stiffness[idx][:, idx].tocsr()
    M = pair.mass[idx][:, idx].tocsr()
    return FemPair(stiffness=K, mass=M), idx


def mesh_area(imm, mesh):
    """Total embedded area of the triangulation."""
    P = mesh.embedded(imm)
    tri = mesh.triangles
    cross = np.cross(P[tri[:, 1]] - P[tri[:, 0]], P[tri[:, 2]] - P[tri[:, 0]])
    return float(0.5 * np.linalg.norm(cross, axis=1).sum())


def write_off(path, points, triangles):
    """Write an embedded triangle mesh in OFF format."""
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{points.shape[0]} {triangles.shape[0]} 0\n")
        for p in points:
            fh.write(" ".join(f"{x:.17g}" for x in p) + "\n")
        for t in triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
