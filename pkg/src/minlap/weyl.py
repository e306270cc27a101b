"""Oscillating annular test functions and their residual certificates.

Given volume-growth constants of a surface, this module builds a
schedule of concentric extrinsic annuli with smooth plateau cutoffs and
evaluates the normalized test functions

    u = sqrt(eta) * psi(eps * r) * exp(i sqrt(lam) * r)

where r is the extrinsic distance and eta normalizes by annulus volume.
The defect Delta u + zeta^2 lam u splits into three pieces -- cutoff
derivatives, the distance Laplacian, and normal alignment -- each
integrated exactly and compared against its closed-form majorant.  A
residual ratio that decays along the schedule while the mass stays
bounded below certifies zeta^2 * lam as an essential-spectrum point up
to the measured alignment band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRatioError
from .quadrature import annulus_volume, region_integral, region_sup

_CUTOFF_E = 8.0


@dataclass(frozen=True)
class ScheduleRow:
    """One annulus of the schedule, in cutoff coordinates t = eps * r."""

    m: int
    c: float
    a: float
    b: float
    d: float
    eps: float
    deriv_bound: float  # dominates both |psi'| and |psi''|

    @property
    def r_lo(self):
        return self.c / self.eps

    @property
    def r_hi(self):
        return self.d / self.eps


@dataclass(frozen=True)
class WeylSchedule:
    rows: tuple
    tau: float  # guaranteed mass fraction of every row
    theta: float  # (C_n / F_n)^(1/n)
    alpha_shape: float
    E: float
    n: int
    C_n: float
    F_n: float
    lam: float
    d0: float

    def row(self, m):
        if not 1 <= m <= len(self.rows):
            raise IndexError(f"schedule has rows 1..{len(self.rows)}")
        return self.rows[m - 1]


def build_schedule(C_n, F_n, alpha_shape, m_max, lam, *, n=2, d0=8.0):
    """Annulus schedule with nonincreasing scales eps_m.

    Each row places the plateau [a, b] and support (c, d) so that the
    guaranteed mass fraction tau = theta^-n (2^-n - 2^-(alpha n)) is
    positive, where theta^n = C_n/F_n compares upper and lower volume
    growth.  The scale eps_m = 2^-k(m) keeps eps_m * C_m <= 1/m; k(m)
    never decreases along the schedule, so the oscillation length is
    never re-coarsened and the residual ratio decays monotonically.
    """
    if F_n <= 0 or C_n < F_n:
        raise InvalidRatioError("need C_n >= F_n > 0 for a positive mass fraction")
    if alpha_shape <= 1:
        raise ValueError("alpha_shape must exceed 1 so the plateau is nonempty")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    theta = (C_n / F_n) ** (1.0 / n)
    # theta^-n written as F_n/C_n keeps tau exact for exact ratios
    tau = (F_n / C_n) * (2.0 ** (-n) - 2.0 ** (-alpha_shape * n))
    rows = []
    k_floor = 0
    for m in range(1, m_max + 1):
        d = m * d0
        b = d / 2.0
        a = d / (2.0**alpha_shape * theta)
        c = a / 2.0
        if not 0 < c < a < b < d:
            raise ValueError("schedule radii collapsed; check alpha_shape and theta")
        w1, w2 = a - c, d - b
        deriv = _CUTOFF_E * (1.0 / w1 + 1.0 / w2 + 1.0 / w1**2 + 1.0 / w2**2)
        k = max(0, math.ceil(math.log2(deriv * m)))
        while 2.0**-k * deriv > 1.0 / m:  # guard against log2 rounding
            k += 1
        k_floor = max(k_floor, k)
        rows.append(
            ScheduleRow(m=m, c=c, a=a, b=b, d=d, eps=2.0**-k_floor, deriv_bound=deriv)
        )
    return WeylSchedule(
        rows=tuple(rows),
        tau=tau,
        theta=theta,
        alpha_shape=alpha_shape,
        E=_CUTOFF_E,
        n=n,
        C_n=C_n,
        F_n=F_n,
        lam=lam,
        d0=d0,
    )


# ---------------------------------------------------------------------------
# cutoffs


def _smoothstep(s):
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def _smoothstep1(s):
    return 30.0 * s * s * (1.0 - s) ** 2


def _smoothstep2(s):
    return 60.0 * s * (1.0 + s * (2.0 * s - 3.0))


@dataclass(frozen=True)
class Cutoff:
    """C^2 plateau bump: 1 on [a, b], 0 outside (c, d), quintic ramps."""

    c: float
    a: float
    b: float
    d: float

    def _pieces(self, t):
        t = np.asarray(t, dtype=float)
        rise = (t > self.c) & (t < self.a)
        fall = (t > self.b) & (t < self.d)
        plateau = (t >= self.a) & (t <= self.b)
        s_rise = (t - self.c) / (self.a - self.c)
        s_fall = (t - self.b) / (self.d - self.b)
        return t, rise, fall, plateau, s_rise, s_fall

    def value(self, t):
        t, rise, fall, plateau, sr, sf = self._pieces(t)
        out = np.zeros(t.shape)
        out[plateau] = 1.0
        out[rise] = _smoothstep(sr[rise])
        out[fall] = 1.0 - _smoothstep(sf[fall])
        return out

    def first(self, t):
        t, rise, fall, _, sr, sf = self._pieces(t)
        out = np.zeros(t.shape)
        out[rise] = _smoothstep1(sr[rise]) / (self.a - self.c)
        out[fall] = -_smoothstep1(sf[fall]) / (self.d - self.b)
        return out

    def second(self, t):
        t, rise, fall, _, sr, sf = self._pieces(t)
        out = np.zeros(t.shape)
        out[rise] = _smoothstep2(sr[rise]) / (self.a - self.c) ** 2
        out[fall] = -_smoothstep2(sf[fall]) / (self.d - self.b) ** 2
        return out


def cutoff(schedule, m):
    row = schedule.row(m)
    return Cutoff(c=row.c, a=row.a, b=row.b, d=row.d)


# ---------------------------------------------------------------------------
# residual decomposition


@dataclass(frozen=True)
class ResidualRow:
    """Integrated defect pieces of one test function against their bounds.

    `term_*` are eta-weighted squared L2 norms over the annulus;
    `bound_*` are the matching closed-form majorants.  The cutoff and
    Laplacian bounds dominate their terms by pointwise majorization
    (the Laplacian one uses Delta r <= n/r, sharp for n <= 2); the
    alignment bound is a sampled supremum, not a certificate.
    """

    m: int
    eps: float
    deriv_bound: float
    mass: float
    term_cutoff: float
    bound_cutoff: float
    term_laplacian: float
    bound_laplacian: float
    term_alignment: float
    bound_alignment: float
    residual_ratio: float
    lam: float
    zeta_sq: float


def residual(imm, base, schedule, m, lam=None, xi=0.0, *, level=4, rtol=1e-8):
    """Evaluate one schedule row's test function on a surface.

    The integrand splits Delta u + zeta^2 lam u into the cutoff-
    derivative piece, the distance-Laplacian piece, and the alignment
    piece; all three squared norms, the mass, and the full squared
    defect are integrated in one quadrature pass (one level deeper
    than plain volumes -- residuals are more sensitive).
    """
    if not getattr(imm, "analytic", False):
        raise ValueError("residual evaluation needs analytic chart derivatives")
    if not 0.0 <= xi < 1.0:
        raise ValueError("xi must lie in [0, 1)")
    if lam is None:
        lam = schedule.lam
    if lam <= 0:
        raise ValueError("lam must be positive")
    row = schedule.row(m)
    eps = row.eps
    psi = Cutoff(c=row.c, a=row.a, b=row.b, d=row.d)
    zeta_sq = 1.0 - xi * xi
    r_lo, r_hi = row.r_lo, row.r_hi

    vol = annulus_volume(imm, base, r_lo, r_hi, level=level, rtol=rtol)
    eta = 1.0 / vol

    def pieces(f):
        t = eps * f.r
        p = psi.value(t)
        p1 = psi.first(t)
        p2 = psi.second(t)
        gn2 = f.grad_norm**2
        lap = f.laplacian_r
        align = f.normal_component**2  # dr(nu)^2
        term1 = (eps**2 * p2 * gn2) ** 2 + 4.0 * lam * (eps * p1 * gn2) ** 2
        term2 = (eps * p1 * lap) ** 2 + lam * (p * lap) ** 2
        term3 = lam**2 * p**2 * (align - xi * xi) ** 2
        re = eps**2 * p2 * gn2 + eps * p1 * lap + lam * p * (zeta_sq - gn2)
        im = 2.0 * eps * p1 * gn2 + p * lap  # times sqrt(lam)
        total = re**2 + lam * im**2
        return np.stack([p * p, term1, term2, term3, total], axis=1)

    # integrate ramp and plateau zones separately: the cutoff is only C^2
    # at its knots, so making the knot circles region boundaries keeps the
    # integrand analytic inside every quadrature region
    zones = [
        (r_lo, row.a / eps),
        (row.a / eps, row.b / eps),
        (row.b / eps, r_hi),
    ]
    ints = np.zeros(5)
    for lo, hi in zones:
        ints += region_integral(
            imm, base, lo, hi, pieces,
            level=level, rtol=rtol, check_truncation=False,
        )
    mass, t_cut, t_lap, t_align, total = (eta * ints).tolist()
    ratio = math.sqrt(max(total, 0.0) / max(mass, 1e-300))

    b_cut = 2.0 * eps**2 * row.deriv_bound**2 * (eps**2 + 2.0 * lam)
    b_lap = (eps**2 / row.c**2) * 2.0 * (eps**2 * row.deriv_bound**2 + lam) * imm.n
    sup_align = region_sup(
        imm, base, r_lo, r_hi,
        lambda f: (xi * xi - f.normal_component**2) ** 2,
    )
    b_align = lam**2 * sup_align
    return ResidualRow(
        m=m,
        eps=eps,
        deriv_bound=row.deriv_bound,
        mass=mass,
        term_cutoff=t_cut,
        bound_cutoff=b_cut,
        term_laplacian=t_lap,
        bound_laplacian=b_lap,
        term_alignment=t_align,
        bound_alignment=b_align,
        residual_ratio=ratio,
        lam=lam,
        zeta_sq=zeta_sq,
    )


def certified_point(row):
    """The spectral point a vanishing residual certifies: zeta^2 * lam."""
    return row.zeta_sq * row.lam
