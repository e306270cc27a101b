"""Command line driver: configuration, subcommand dispatch, reports.

Every run writes a JSON report envelope plus one CSV per result table
into the output directory; figures are rendered alongside unless
disabled.  The envelope is deterministic for a fixed configuration --
re-running produces byte-identical JSON except for the timestamp.
Exit codes: 0 when every verdict passes, 2 when at least one verdict
fails, 1 on configuration or execution errors (diagnostic on stderr).

Only the standard library is imported at module level so that
``MINLAP_THREADS`` can cap the BLAS/OpenMP thread pools before numpy
is first loaded.
"""

import argparse
import copy
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import ConfigParseError, MinlapError

SUBCOMMANDS = ("volume", "spectrum", "weyl", "audit", "pohozaev", "bdgg", "all")

_THREAD_ENV = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

_SURFACE_KINDS = ("plane", "graph", "catenoid", "helicoid")
_BASE_KINDS = ("origin", "chart", "ambient")
_FIELD_KINDS = ("constant", "coordinate", "bump")
_TRUNCATION_KEYS = ("radius", "t_max", "rho_max", "theta_max")

_DEFAULTS = {
    "surface": {
        "kind": "plane",
        "n": 2,
        "neck_radius": 1.0,
        "pitch": 1.0,
        "graph": None,
        "truncation": {},
    },
    "base": {"kind": "chart", "coords": [0.0, 0.0]},
    "radii": "1:10:10",
    "shell_radii": None,
    "quad_level": 3,
    "quad_rtol": 1e-7,
    "eigen": {"radius": 6.0, "resolution": 48, "count": 6},
    "weyl": {
        "C_n": None,
        "F_n": None,
        "alpha_shape": 2.0,
        "lam": 1.0,
        "xi": 0.0,
        "m_max": 6,
    },
    "pohozaev": {
        "radius": 2.0,
        "lam": 1.0,
        "field": "bump",
        "width": 1.0,
        "audit_radii": "0.5:2:4",
    },
    "bdgg": {"m": 4, "R": 5.0, "resolution": 24, "B": 10.0, "D": 10.0, "lam": None},
    "out": "minlap-out",
    "figures": True,
    "export_mesh": False,
}


def _apply_thread_cap():
    cap = os.environ.get("MINLAP_THREADS")
    if not cap:
        return
    if not cap.isdigit() or int(cap) < 1:
        raise ConfigParseError(f"MINLAP_THREADS must be a positive integer, got {cap!r}")
    for var in _THREAD_ENV:
        os.environ.setdefault(var, cap)


# ---------------------------------------------------------------------------
# configuration


def _parse_grid(value, name):
    """A radii-style grid: 'lo:hi:count', 'a,b,c', a number, or a list."""
    if value is None:
        return None
    if isinstance(value, (int, float)):
        value = [float(value)]
    if isinstance(value, str):
        text = value.strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigParseError(f"{name}: expected 'lo:hi:count', got {value!r}")
            try:
                lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise ConfigParseError(f"{name}: expected 'lo:hi:count', got {value!r}")
            if count < 1 or hi < lo:
                raise ConfigParseError(f"{name}: empty grid {value!r}")
            if count == 1:
                value = [lo]
            else:
                step = (hi - lo) / (count - 1)
                value = [lo + i * step for i in range(count)]
        else:
            try:
                value = [float(tok) for tok in text.split(",") if tok.strip()]
            except ValueError:
                raise ConfigParseError(f"{name}: could not parse {value!r}")
    try:
        grid = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigParseError(f"{name}: expected a list of numbers, got {value!r}")
    if not grid:
        raise ConfigParseError(f"{name}: grid is empty")
    if any(v <= 0 for v in grid):
        raise ConfigParseError(f"{name}: radii must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigParseError(f"{name}: radii must be strictly increasing")
    return grid


def _merge(dst, src, path=""):
    for key, val in src.items():
        here = f"{path}.{key}" if path else key
        if key not in dst:
            raise ConfigParseError(f"unknown config key {here!r}")
        if isinstance(dst[key], dict) and key != "truncation":
            if not isinstance(val, dict):
                raise ConfigParseError(f"{here}: expected an object")
            _merge(dst[key], val, here)
        elif key == "truncation":
            if not isinstance(val, dict):
                raise ConfigParseError(f"{here}: expected an object")
            for tkey, tval in val.items():
                if tkey not in _TRUNCATION_KEYS:
                    raise ConfigParseError(f"unknown config key {here}.{tkey!r}")
                dst[key][tkey] = float(tval)
        else:
            dst[key] = val


def _require(cond, message):
    if not cond:
        raise ConfigParseError(message)


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully resolved run configuration.

    Grids given as strings ('1:10:10' or '1,2,5') are resolved to
    tuples of floats; the echo written into every report envelope is
    therefore independent of how the grid was spelled.
    """

    surface: dict
    base: dict
    radii: tuple
    shell_radii: tuple
    quad_level: int
    quad_rtol: float
    eigen: dict
    weyl: dict
    pohozaev: dict
    bdgg: dict
    out: str
    figures: bool
    export_mesh: bool

    @staticmethod
    def from_dict(raw):
        data = copy.deepcopy(_DEFAULTS)
        if not isinstance(raw, dict):
            raise ConfigParseError("config document must be a JSON object")
        _merge(data, raw)

        surf = data["surface"]
        _require(surf["kind"] in _SURFACE_KINDS, f"surface.kind must be one of {_SURFACE_KINDS}")
        _require(isinstance(surf["n"], int) and surf["n"] >= 2, "surface.n must be an integer >= 2")
        _require(surf["neck_radius"] > 0, "surface.neck_radius must be positive")
        _require(surf["pitch"] > 0, "surface.pitch must be positive")
        if surf["graph"] is not None:
            _require(isinstance(surf["graph"], str), "surface.graph must be a builtin graph name")

        base = data["base"]
        _require(base["kind"] in _BASE_KINDS, f"base.kind must be one of {_BASE_KINDS}")
        coords = base.get("coords") or []
        try:
            base["coords"] = [float(c) for c in coords]
        except (TypeError, ValueError):
            raise ConfigParseError("base.coords must be a list of numbers")
        if base["kind"] == "chart":
            _require(len(base["coords"]) == surf["n"], "base.coords must have length surface.n")
        if base["kind"] == "ambient":
            _require(len(base["coords"]) == surf["n"] + 1, "ambient base.coords must have length surface.n + 1")

        radii = _parse_grid(data["radii"], "radii")
        shells = _parse_grid(data["shell_radii"], "shell_radii")

        _require(isinstance(data["quad_level"], int) and 1 <= data["quad_level"] <= 6,
                 "quad_level must be an integer in 1..6")
        _require(data["quad_rtol"] > 0, "quad_rtol must be positive")

        eig = data["eigen"]
        _require(eig["radius"] > 0, "eigen.radius must be positive")
        _require(isinstance(eig["resolution"], int) and eig["resolution"] >= 8,
                 "eigen.resolution must be an integer >= 8")
        _require(isinstance(eig["count"], int) and eig["count"] >= 1,
                 "eigen.count must be an integer >= 1")

        wy = data["weyl"]
        for key in ("C_n", "F_n"):
            if wy[key] is not None:
                wy[key] = float(wy[key])
                _require(wy[key] > 0, f"weyl.{key} must be positive")
        _require(wy["alpha_shape"] > 1, "weyl.alpha_shape must exceed 1")
        _require(wy["lam"] > 0, "weyl.lam must be positive")
        _require(0 <= wy["xi"] < 1, "weyl.xi must lie in [0, 1)")
        _require(isinstance(wy["m_max"], int) and wy["m_max"] >= 1,
                 "weyl.m_max must be an integer >= 1")

        po = data["pohozaev"]
        _require(po["radius"] > 0, "pohozaev.radius must be positive")
        _require(po["field"] in _FIELD_KINDS, f"pohozaev.field must be one of {_FIELD_KINDS}")
        _require(po["width"] > 0, "pohozaev.width must be positive")
        po["audit_radii"] = _parse_grid(po["audit_radii"], "pohozaev.audit_radii")

        bd = data["bdgg"]
        _require(isinstance(bd["m"], int) and bd["m"] >= 2, "bdgg.m must be an integer >= 2")
        _require(bd["R"] > 0, "bdgg.R must be positive")
        _require(isinstance(bd["resolution"], int) and bd["resolution"] >= 4,
                 "bdgg.resolution must be an integer >= 4")
        if bd["lam"] is not None:
            bd["lam"] = float(bd["lam"])

        _require(isinstance(data["out"], str) and data["out"], "out must be a directory path")
        _require(isinstance(data["figures"], bool), "figures must be a boolean")
        _require(isinstance(data["export_mesh"], bool), "export_mesh must be a boolean")

        return RunConfig(
            surface=surf,
            base=base,
            radii=radii,
            shell_radii=shells,
            quad_level=data["quad_level"],
            quad_rtol=float(data["quad_rtol"]),
            eigen=eig,
            weyl=wy,
            pohozaev=po,
            bdgg=bd,
            out=data["out"],
            figures=data["figures"],
            export_mesh=data["export_mesh"],
        )

    def to_dict(self):
        po = dict(self.pohozaev)
        po["audit_radii"] = list(po["audit_radii"])
        return {
            "surface": copy.deepcopy(self.surface),
            "base": copy.deepcopy(self.base),
            "radii": list(self.radii),
            "shell_radii": None if self.shell_radii is None else list(self.shell_radii),
            "quad_level": self.quad_level,
            "quad_rtol": self.quad_rtol,
            "eigen": dict(self.eigen),
            "weyl": dict(self.weyl),
            "pohozaev": po,
            "bdgg": dict(self.bdgg),
            "out": self.out,
            "figures": self.figures,
            "export_mesh": self.export_mesh,
        }


# ---------------------------------------------------------------------------
# object builders (numpy and submodules are imported lazily in here)


def _build_surface(cfg, truncation=None):
    from .surfaces import SurfaceSpec, make_immersion

    s = cfg.surface
    trunc = dict(s["truncation"])
    if truncation:
        trunc.update(truncation)
    spec = SurfaceSpec(
        kind=s["kind"],
        n=s["n"],
        neck_radius=s["neck_radius"],
        pitch=s["pitch"],
        graph=s["graph"],
        truncation=trunc,
    )
    return spec, make_immersion(spec)


def _build_base(cfg, spec, imm):
    from .geometry import BasePoint

    b = cfg.base
    amb = spec.n + 1
    if b["kind"] == "origin":
        return BasePoint.origin(amb)
    if b["kind"] == "ambient":
        return BasePoint.ambient(b["coords"])
    return BasePoint.at_chart(imm, b["coords"])


def _verdict(name, ok, invariant, **resolution):
    return {
        "name": name,
        "verdict": "pass" if ok else "fail",
        "invariant": invariant,
        "resolution": resolution,
    }


# ---------------------------------------------------------------------------
# output writers


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if hasattr(obj, "tolist"):  # numpy array or scalar
        return _jsonify(obj.tolist())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def _csv_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if hasattr(value, "item"):
        return _csv_cell(value.item())
    return str(value)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_report(out_dir, subcommand, cfg, payload, verdicts):
    envelope = {
        "tool": {"name": "minlap", "version": _version()},
        "subcommand": subcommand,
        "config": cfg.to_dict(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "payload": _jsonify(payload),
        "verdicts": _jsonify(verdicts),
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(envelope, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _version():
    from . import __version__

    return __version__


def _render_figures(out_dir, figures, enabled):
    if not enabled or not figures:
        return []
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for filename, draw in figures:
        fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=110)
        draw(ax)
        fig.tight_layout()
        path = os.path.join(out_dir, filename)
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# subcommand runners; each returns (payload, verdicts, tables, figures)


def _run_volume(cfg, out_dir):
    import numpy as np

    from .diagnostics import small_radius_limit, volume_growth

    spec, imm = _build_surface(cfg)
    base = _build_base(cfg, spec, imm)
    radii = np.asarray(cfg.radii)
    report = volume_growth(imm, base, radii, level=cfg.quad_level, rtol=cfg.quad_rtol)

    payload = {
        "surface": spec.to_dict(),
        "n": report.n,
        "radii": report.radii,
        "volumes": report.volumes,
        "ratios": report.ratios,
        "omega_n": report.omega_n,
        "C_n_estimate": report.C_n_estimate,
        "F_n_estimate": report.F_n_estimate,
        "ends_bound": report.ends_bound,
        "mu_estimate": report.mu_estimate,
        "brooks_bound": report.brooks_bound,
        "flat_excess_flag": report.flat_excess_flag,
    }
    if base.chart_coords is not None:
        small = small_radius_limit(imm, base, [0.02, 0.01], level=cfg.quad_level, rtol=cfg.quad_rtol)
        payload["small_radius_ratios"] = small

    resolution = {
        "quad_level": cfg.quad_level,
        "quad_rtol": cfg.quad_rtol,
        "radii_count": len(cfg.radii),
    }
    verdicts = [
        _verdict(
            "volume-ratio-monotone",
            report.monotone_verdict,
            "diagnostics.volume_growth: V(r)/r^n is nondecreasing in r (monotone_verdict)",
            monotone_tol=report.monotone_tol,
            **resolution,
        ),
        _verdict(
            "volume-miranda-bound",
            report.miranda_verdict,
            "diagnostics.volume_growth: V(r) <= ((n+1)^2/2) omega_{n+1} r^n (miranda_verdict)",
            **resolution,
        ),
    ]

    header = ["r", "volume", "ratio", "miranda_rhs", "mu_partial"]
    rows = list(zip(report.radii, report.volumes, report.ratios, report.miranda_rhs, report.mu_partial))
    tables = [("volume.csv", header, rows)]

    def draw(ax):
        ax.plot(report.radii, report.ratios, "o-", label="V(r) / r^n")
        ax.axhline(report.omega_n, color="gray", ls="--", label="one plane")
        ax.set_xlabel("r")
        ax.set_ylabel("ratio")
        ax.set_title("extrinsic volume growth")
        ax.legend()

    return payload, verdicts, tables, [("volume.png", draw)]


def _run_spectrum(cfg, out_dir):
    from .eigensolve import lowest_eigenpairs
    from .meshing import assemble, ball_mesh, dirichlet_reduce, write_off

    spec, imm = _build_surface(cfg)
    base = _build_base(cfg, spec, imm)
    radius = float(cfg.eigen["radius"])
    resolution = cfg.eigen["resolution"]
    count = cfg.eigen["count"]

    mesh = ball_mesh(imm, base, radius, resolution)
    pair = assemble(imm, mesh)
    reduced, interior = dirichlet_reduce(pair, mesh)
    result = lowest_eigenpairs(reduced.stiffness, reduced.mass, count)

    values = result.values
    payload = {
        "surface": spec.to_dict(),
        "radius": radius,
        "mesh_resolution": resolution,
        "vertices": int(mesh.vertices.shape[0]),
        "interior_dim": int(len(interior)),
        "eigenvalues": values,
        "lambda1_r2": float(values[0] * radius**2),
        "residuals": result.residuals,
        "iterations": result.iterations,
        "method": result.method,
    }

    max_res = float(max(result.residuals))
    resolution_info = {"mesh_resolution": resolution, "vertices": int(mesh.vertices.shape[0])}
    verdicts = [
        _verdict(
            "spectrum-pair-residual",
            max_res <= 1e-5 * max(1.0, float(values[-1])),
            "eigensolve.lowest_eigenpairs: ||K v - lambda M v||_2 / ||v||_M stays small",
            max_residual=max_res,
            residual_tol=1e-5 * max(1.0, float(values[-1])),
            **resolution_info,
        ),
        _verdict(
            "spectrum-positive-ascending",
            bool(values[0] > 0 and all(b >= a for a, b in zip(values, values[1:]))),
            "eigensolve.lowest_eigenpairs: Dirichlet eigenvalues are positive and ascending",
            **resolution_info,
        ),
    ]

    rows = [(i + 1, float(v), float(r)) for i, (v, r) in enumerate(zip(values, result.residuals))]
    tables = [("spectrum.csv", ["index", "lambda", "residual"], rows)]

    if cfg.export_mesh:
        write_off(os.path.join(out_dir, "mesh.off"), mesh.embedded(imm), mesh.triangles)

    def draw(ax):
        ax.plot(range(1, len(values) + 1), values, "o-")
        ax.set_xlabel("index")
        ax.set_ylabel("lambda")
        ax.set_title(f"Dirichlet eigenvalues, r = {radius:g}")

    return payload, verdicts, tables, [("spectrum.png", draw)]


def _weyl_growth_defaults(kind):
    import math

    if kind == "plane":
        return math.pi, math.pi
    if kind == "catenoid":
        return 2 * math.pi, math.pi
    return None, None


def _run_weyl(cfg, out_dir):
    from .weyl import build_schedule, residual

    wy = cfg.weyl
    kind = cfg.surface["kind"]
    C_n, F_n = wy["C_n"], wy["F_n"]
    if C_n is None or F_n is None:
        auto_C, auto_F = _weyl_growth_defaults(kind)
        C_n = auto_C if C_n is None else C_n
        F_n = auto_F if F_n is None else F_n
        if C_n is None or F_n is None:
            raise ConfigParseError(
                f"weyl.C_n and weyl.F_n must be given explicitly for surface kind {kind!r}"
            )

    schedule = build_schedule(C_n, F_n, wy["alpha_shape"], wy["m_max"], wy["lam"], n=cfg.surface["n"])

    # The outermost annulus must fit inside the truncated chart.
    reach = max(row.r_hi for row in schedule.rows) * 1.05
    truncation = None
    if kind in ("plane", "graph") and "radius" not in cfg.surface["truncation"]:
        truncation = {"radius": reach}
    spec, imm = _build_surface(cfg, truncation)
    base = _build_base(cfg, spec, imm)

    rows = []
    for m in range(1, wy["m_max"] + 1):
        rows.append(residual(imm, base, schedule, m, wy["lam"], wy["xi"],
                             level=cfg.quad_level, rtol=cfg.quad_rtol))

    ratios = [row.residual_ratio for row in rows]
    payload = {
        "surface": spec.to_dict(),
        "C_n": C_n,
        "F_n": F_n,
        "tau": schedule.tau,
        "theta": schedule.theta,
        "lam": wy["lam"],
        "xi": wy["xi"],
        "rows": [
            {
                "m": row.m,
                "eps": row.eps,
                "mass": row.mass,
                "term_cutoff": row.term_cutoff,
                "bound_cutoff": row.bound_cutoff,
                "term_laplacian": row.term_laplacian,
                "bound_laplacian": row.bound_laplacian,
                "term_alignment": row.term_alignment,
                "bound_alignment": row.bound_alignment,
                "residual_ratio": row.residual_ratio,
            }
            for row in rows
        ],
        "ratio_drop": float(ratios[0] / ratios[-1]) if len(ratios) > 1 else 1.0,
    }

    resolution = {"quad_level": cfg.quad_level, "m_max": wy["m_max"]}
    slack = 1.0 + 1e-12
    verdicts = [
        _verdict(
            "weyl-mass-fraction",
            all(row.mass >= schedule.tau - 1e-2 for row in rows),
            "weyl.residual: every annulus carries at least the guaranteed mass fraction tau",
            tau=schedule.tau,
            mass_tol=1e-2,
            **resolution,
        ),
        _verdict(
            "weyl-cutoff-bound",
            all(row.term_cutoff <= row.bound_cutoff * slack for row in rows),
            "weyl.residual: the cutoff-derivative term is dominated by its closed-form bound",
            **resolution,
        ),
        _verdict(
            "weyl-laplacian-bound",
            all(row.term_laplacian <= row.bound_laplacian * slack for row in rows),
            "weyl.residual: the distance-Laplacian term is dominated by its closed-form bound",
            **resolution,
        ),
        _verdict(
            "weyl-ratio-decreasing",
            all(b < a for a, b in zip(ratios, ratios[1:])),
            "weyl.residual: residual_ratio decreases strictly along the schedule",
            **resolution,
        ),
    ]

    header = [
        "m", "eps", "deriv_bound", "mass",
        "term_cutoff", "bound_cutoff",
        "term_laplacian", "bound_laplacian",
        "term_alignment", "bound_alignment",
        "residual_ratio",
    ]
    table_rows = [
        (row.m, row.eps, row.deriv_bound, row.mass,
         row.term_cutoff, row.bound_cutoff,
         row.term_laplacian, row.bound_laplacian,
         row.term_alignment, row.bound_alignment,
         row.residual_ratio)
        for row in rows
    ]
    tables = [("weyl.csv", header, table_rows)]

    def draw(ax):
        ax.semilogy([row.m for row in rows], ratios, "o-")
        ax.set_xlabel("m")
        ax.set_ylabel("residual ratio")
        ax.set_title("Weyl-sequence residual decay")

    return payload, verdicts, tables, [("weyl.png", draw)]


def _run_audit(cfg, out_dir):
    from .diagnostics import curvature_audit
    from .surfaces import graph_spec_of

    spec, imm = _build_surface(cfg)
    base = _build_base(cfg, spec, imm)
    report = curvature_audit(
        imm,
        base,
        shell_radii=cfg.shell_radii,
        graph=graph_spec_of(spec),
        quad_level=cfg.quad_level,
    )

    payload = {
        "surface": spec.to_dict(),
        "curvature_bound_verdict": report.curvature_bound_verdict,
        "equality_points": report.equality_points,
        "strict_witness": report.strict_witness,
        "fail_witness": report.fail_witness,
        "shell_radii": report.shell_radii,
        "decay_trend": report.decay_trend,
        "tail_sup": report.tail_sup,
        "trend_consistent": report.trend_consistent,
        "decays_to_zero": report.decays_to_zero,
        "graph_bound_verdict": report.graph_bound_verdict,
        "total_curvature": report.total_curvature,
        "xi_band": {
            "radii": report.xi_band.radii,
            "lower": report.xi_band.lower,
            "upper": report.xi_band.upper,
            "converged": report.xi_band.converged,
        },
        "resolution": report.resolution,
    }

    resolution = dict(report.resolution)
    verdicts = [
        _verdict(
            "audit-curvature-bound",
            report.curvature_bound_verdict in ("pass_strict", "pass_equality_only_at"),
            "diagnostics.curvature_audit: r max|kappa| <= 1, strict away from the equality set",
            verdict=report.curvature_bound_verdict,
            **resolution,
        ),
        _verdict(
            "audit-decay-trend",
            bool(report.trend_consistent and report.decays_to_zero),
            "diagnostics.curvature_audit: shell and tail estimators of sup r max|kappa| agree and decay",
            **resolution,
        ),
    ]
    if report.graph_bound_verdict is not None:
        verdicts.append(
            _verdict(
                "audit-graph-hessian-bound",
                report.graph_bound_verdict in ("pass_strict", "pass_equality_only_at"),
                "diagnostics.curvature_audit: graph Hessian bound |r D2f| <= (1 + |Df|^2)^(3/2)",
                verdict=report.graph_bound_verdict,
                **resolution,
            )
        )

    rows = list(zip(report.shell_radii, report.decay_trend, report.tail_sup))
    tables = [("audit.csv", ["r_shell", "decay_trend", "tail_sup"], rows)]

    def draw(ax):
        ax.plot(report.shell_radii, report.decay_trend, "o-", label="shell sup")
        ax.plot(report.shell_radii, report.tail_sup, "s--", label="tail sup")
        ax.set_xlabel("r")
        ax.set_ylabel("r max |kappa|")
        ax.set_title("distance-curvature decay")
        ax.legend()

    return payload, verdicts, tables, [("audit.png", draw)]


def _build_field(po, n):
    from .pohozaev import bump_field, constant_field, coordinate_field

    if po["field"] == "constant":
        return constant_field(1.0, n=n)
    if po["field"] == "coordinate":
        return coordinate_field(0, n=n)
    return bump_field(center=(0.0,) * n, width=po["width"])


def _run_pohozaev(cfg, out_dir):
    from .pohozaev import BallDomain, absence_audit, identity_residual

    spec, imm = _build_surface(cfg)
    base = _build_base(cfg, spec, imm)
    po = cfg.pohozaev
    u = _build_field(po, spec.n)

    report = identity_residual(
        imm, BallDomain(base, po["radius"]), u, base, po["lam"], level=cfg.quad_level
    )
    scale = max(1.0, abs(report.lhs), abs(report.rhs))
    identity_ok = report.residual <= 1e-5 * scale

    audit = absence_audit(
        imm, base, u, po["lam"], po["audit_radii"], level=cfg.quad_level, rtol=cfg.quad_rtol
    )

    payload = {
        "surface": spec.to_dict(),
        "field": po["field"],
        "lam": po["lam"],
        "identity": {
            "lhs_terms": report.lhs_terms,
            "rhs_terms": report.rhs_terms,
            "lhs": report.lhs,
            "rhs": report.rhs,
            "residual": report.residual,
            "domain": report.domain,
        },
        "audit": {
            "min_eig": audit.min_eig,
            "min_eig_witness": audit.min_eig_witness,
            "strict_witness": audit.strict_witness,
            "convexity_verdict": audit.convexity_verdict,
            "verdict": audit.verdict,
            "resolution": audit.resolution,
        },
    }

    verdicts = [
        _verdict(
            "pohozaev-identity",
            bool(identity_ok),
            "pohozaev.identity_residual: domain terms balance boundary terms on the ball",
            residual=report.residual,
            scale=scale,
            quad_level=report.level,
            clip_frac=report.clip_frac,
        ),
        _verdict(
            "pohozaev-convexity",
            audit.verdict == "consistent with strict convexity",
            "pohozaev.absence_audit: Hess h is positive semidefinite with a strict witness",
            convexity_verdict=audit.convexity_verdict,
            min_eig=audit.min_eig,
            **audit.resolution,
        ),
    ]

    rows = list(zip(audit.boundary_radii, audit.energy_values, audit.bt_mass,
                    audit.bt_potential, audit.bt_cross, audit.eq_gap))
    tables = [("pohozaev.csv",
               ["r", "energy", "bt_mass", "bt_potential", "bt_cross", "eq_gap"],
               rows)]

    def draw(ax):
        ax.plot(audit.boundary_radii, audit.energy_values, "o-", label="Hess h energy")
        ax.plot(audit.boundary_radii, audit.eq_gap, "s--", label="identity gap")
        ax.set_xlabel("r")
        ax.set_ylabel("value")
        ax.set_title("integral-identity audit")
        ax.legend()

    return payload, verdicts, tables, [("pohozaev.png", draw)]


def _run_bdgg(cfg, out_dir):
    import numpy as np

    from .bdgg import normal_alignment_probe, params, solve_reduced_mse

    bd = cfg.bdgg
    par = params(bd["m"], B=bd["B"], D=bd["D"], lam=bd["lam"])
    R = float(bd["R"])
    sol = solve_reduced_mse(par, R, bd["resolution"])

    shells = cfg.shell_radii or tuple(R * f for f in (0.25, 0.5, 0.75))
    probe = normal_alignment_probe(sol, shells)

    asym = float(sol.mirror_asymmetry())
    diag = sol.diagonal_values()
    diag_max = float(np.max(np.abs(diag))) if len(diag) else 0.0

    payload = {
        "params": {
            "m": par.m,
            "p": par.p,
            "delta": par.delta,
            "alpha": par.alpha,
            "lambda_range": list(par.lambda_range),
            "lam": par.lam,
            "B": par.B,
            "D": par.D,
            "valid": par.valid,
        },
        "R": R,
        "grid_resolution": bd["resolution"],
        "newton_iterations": sol.newton_iterations,
        "residual_norm": sol.residual_norm,
        "tolerance": sol.tolerance,
        "mirror_asymmetry": asym,
        "diagonal_max": diag_max,
        "ordering": sol.ordering,
        "gradient_report": sol.gradient_report,
        "probe": {
            "radii": probe.radii,
            "lower": probe.lower,
            "upper": probe.upper,
            "counts": probe.counts,
        },
    }

    resolution = {"grid_resolution": bd["resolution"], "R": R}
    verdicts = [
        _verdict(
            "bdgg-newton-converged",
            bool(sol.residual_norm <= sol.tolerance),
            "bdgg.solve_reduced_mse: the weighted P1 residual drops below the Newton tolerance",
            residual_norm=sol.residual_norm,
            tolerance=sol.tolerance,
            iterations=sol.newton_iterations,
            **resolution,
        ),
        _verdict(
            "bdgg-antisymmetry",
            bool(asym <= 1e-8 and diag_max <= 1e-8),
            "bdgg.solve_reduced_mse: the reduced solution is odd across the diagonal u = v",
            mirror_asymmetry=asym,
            diagonal_max=diag_max,
            **resolution,
        ),
        _verdict(
            "bdgg-barrier-ordering",
            bool(sol.ordering["lower_violations"] == 0 and sol.ordering["upper_violations"] == 0),
            "bdgg.solve_reduced_mse: |f1| <= |f| <= |f2| at the interior sample points",
            **sol.ordering,
            **resolution,
        ),
    ]

    sol_rows = [(float(n0), float(n1), float(f)) for (n0, n1), f in zip(sol.nodes, sol.values)]
    probe_rows = list(zip(probe.radii, probe.lower, probe.upper, probe.counts))
    tables = [
        ("bdgg_solution.csv", ["u", "v", "f"], sol_rows),
        ("bdgg_probe.csv", ["r", "lower", "upper", "count"], probe_rows),
    ]

    def draw(ax):
        tp = ax.tripcolor(sol.nodes[:, 0], sol.nodes[:, 1], sol.triangles, sol.values,
                          shading="gouraud", cmap="RdBu_r")
        ax.figure.colorbar(tp, ax=ax, label="f")
        ax.set_xlabel("u")
        ax.set_ylabel("v")
        ax.set_aspect("equal")
        ax.set_title(f"reduced minimal graph, m = {par.m}")

    return payload, verdicts, tables, [("bdgg.png", draw)]


_RUNNERS = {
    "volume": _run_volume,
    "spectrum": _run_spectrum,
    "weyl": _run_weyl,
    "audit": _run_audit,
    "pohozaev": _run_pohozaev,
    "bdgg": _run_bdgg,
}


def _execute(subcommand, cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    payload, verdicts, tables, figures = _RUNNERS[subcommand](cfg, out_dir)
    for filename, header, rows in tables:
        _write_csv(os.path.join(out_dir, filename), header, rows)
    _render_figures(out_dir, figures, cfg.figures)
    _write_report(out_dir, subcommand, cfg, payload, verdicts)
    return payload, verdicts


def run(subcommand, cfg):
    """Run one subcommand; returns the process exit code (0 or 2).

    Execution errors propagate as exceptions; `main` maps them to exit
    code 1.  The `all` subcommand writes each battery into its own
    subdirectory plus an aggregate report at the top level.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigParseError(f"unknown subcommand {subcommand!r}")
    if subcommand != "all":
        _, verdicts = _execute(subcommand, cfg, cfg.out)
        return 2 if any(v["verdict"] == "fail" for v in verdicts) else 0

    all_payload = {}
    all_verdicts = []
    for name in SUBCOMMANDS[:-1]:
        sub_dir = os.path.join(cfg.out, name)
        payload, verdicts = _execute(name, cfg, sub_dir)
        all_payload[name] = payload
        for v in verdicts:
            entry = dict(v)
            entry["name"] = f"{name}:{v['name']}"
            all_verdicts.append(entry)
    os.makedirs(cfg.out, exist_ok=True)
    _write_report(cfg.out, "all", cfg, all_payload, all_verdicts)
    return 2 if any(v["verdict"] == "fail" for v in all_verdicts) else 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="minlap",
        description="Laplace-spectrum laboratory for complete minimal hypersurfaces",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} battery")
        p.add_argument("--config", help="JSON configuration document")
        p.add_argument("--out", help="output directory")
        p.add_argument("--surface", choices=_SURFACE_KINDS, help="catalog surface kind")
        p.add_argument("--n", type=int, help="chart dimension (graphs and planes)")
        p.add_argument("--neck-radius", type=float, help="catenoid neck radius")
        p.add_argument("--pitch", type=float, help="helicoid pitch")
        p.add_argument("--graph", help="builtin graph function name")
        p.add_argument("--trunc-radius", type=float, help="chart truncation radius")
        p.add_argument("--t-max", type=float, help="catenoid truncation parameter")
        p.add_argument("--base", help="base point: origin | chart:q1,..,qn | ambient:x1,..,x(n+1)")
        p.add_argument("--radii", help="radius grid: lo:hi:count or a comma list")
        p.add_argument("--shell-radii", help="shell radius grid for audits and probes")
        p.add_argument("--quad-level", type=int, help="tensor quadrature refinement level")
        p.add_argument("--quad-rtol", type=float, help="adaptive quadrature relative tolerance")
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
        p.add_argument("--export-mesh", action="store_true", help="write the FEM mesh as OFF")
        p.add_argument("--eigen-radius", type=float, help="ball radius for the FEM eigenproblem")
        p.add_argument("--eigen-count", type=int, help="number of eigenpairs to compute")
        p.add_argument("--eigen-resolution", type=int, help="mesh resolution (rings per radius)")
        p.add_argument("--lambda", dest="lam", type=float, help="spectral parameter lambda")
        p.add_argument("--xi", type=float, help="alignment parameter xi in [0, 1)")
        p.add_argument("--m-max", type=int, help="number of Weyl annuli")
        p.add_argument("--cn", type=float, help="upper volume growth constant C_n")
        p.add_argument("--fn", type=float, help="lower volume growth constant F_n")
        p.add_argument("--alpha-shape", type=float, help="annulus plateau shape parameter")
        p.add_argument("--field", choices=_FIELD_KINDS, help="test field for the identity audit")
        p.add_argument("--width", type=float, help="bump field width")
        p.add_argument("--radius", type=float, help="identity-audit ball radius")
        p.add_argument("--audit-radii", help="radius grid for the convexity audit")
        p.add_argument("--m", type=int, help="block dimension m of the doubly rotational graph")
        p.add_argument("--r-max", type=float, help="reduced-solver domain radius")
        p.add_argument("--resolution", type=int, help="reduced-solver grid resolution")
        p.add_argument("--b-coef", type=float, help="upper barrier amplitude B")
        p.add_argument("--d-coef", type=float, help="upper barrier tilt D")
    return parser


def _parse_base(text):
    text = text.strip()
    if text == "origin":
        return {"kind": "origin", "coords": []}
    for kind in ("chart", "ambient"):
        if text.startswith(kind + ":"):
            try:
                coords = [float(tok) for tok in text[len(kind) + 1:].split(",")]
            except ValueError:
                raise ConfigParseError(f"could not parse base coordinates in {text!r}")
            return {"kind": kind, "coords": coords}
    raise ConfigParseError(f"base must be 'origin', 'chart:…', or 'ambient:…', got {text!r}")


def _overrides_from_args(args):
    """Translate command line flags into a config-document overlay."""
    over = {}

    def put(path, value):
        if value is None:
            return
        node = over
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value

    put(("surface", "kind"), args.surface)
    put(("surface", "n"), args.n)
    put(("surface", "neck_radius"), args.neck_radius)
    put(("surface", "pitch"), args.pitch)
    put(("surface", "graph"), args.graph)
    put(("surface", "truncation", "radius"), args.trunc_radius)
    put(("surface", "truncation", "t_max"), args.t_max)
    if args.base is not None:
        put(("base",), _parse_base(args.base))
    put(("radii",), args.radii)
    put(("shell_radii",), args.shell_radii)
    put(("quad_level",), args.quad_level)
    put(("quad_rtol",), args.quad_rtol)
    put(("out",), args.out)
    if args.no_figures:
        put(("figures",), False)
    if args.export_mesh:
        put(("export_mesh",), True)
    put(("eigen", "radius"), args.eigen_radius)
    put(("eigen", "count"), args.eigen_count)
    put(("eigen", "resolution"), args.eigen_resolution)
    if args.lam is not None:
        put(("weyl", "lam"), args.lam)
        put(("pohozaev", "lam"), args.lam)
        put(("bdgg", "lam"), args.lam if args.subcommand == "bdgg" else None)
    put(("weyl", "xi"), args.xi)
    put(("weyl", "m_max"), args.m_max)
    put(("weyl", "C_n"), args.cn)
    put(("weyl", "F_n"), args.fn)
    put(("weyl", "alpha_shape"), args.alpha_shape)
    put(("pohozaev", "field"), args.field)
    put(("pohozaev", "width"), args.width)
    put(("pohozaev", "radius"), args.radius)
    put(("pohozaev", "audit_radii"), args.audit_radii)
    put(("bdgg", "m"), args.m)
    put(("bdgg", "R"), args.r_max)
    put(("bdgg", "resolution"), args.resolution)
    put(("bdgg", "B"), args.b_coef)
    put(("bdgg", "D"), args.d_coef)
    return over


def _deep_update(dst, src):
    for key, val in src.items():
        if isinstance(val, dict) and isinstance(dst.get(key), dict):
            _deep_update(dst[key], val)
        else:
            dst[key] = val


def load_config(args):
    """Merge defaults, the optional JSON document, and flag overrides."""
    document = {}
    if args.config:
        try:
            with open(args.config) as fh:
                document = json.load(fh)
        except OSError as exc:
            raise ConfigParseError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"config file is not valid JSON: {exc}")
        if not isinstance(document, dict):
            raise ConfigParseError("config document must be a JSON object")
    merged = copy.deepcopy(document)
    _deep_update(merged, _overrides_from_args(args))
    return RunConfig.from_dict(merged)


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that code is reserved for
        # verdict failures here, so remap (--help still exits 0).
        return 0 if exc.code == 0 else 1
    try:
        _apply_thread_cap()
        cfg = load_config(args)
        return run(args.subcommand, cfg)
    except ConfigParseError as exc:
        print(f"minlap: config error: {exc}", file=sys.stderr)
        return 1
    except (MinlapError, ValueError) as exc:
        print(f"minlap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
