"""Numerical laboratory for the Laplace spectrum of complete minimal hypersurfaces.

Submodules
----------
geometry    immersions, point frames, extrinsic-distance calculus
surfaces    catalog of chart-based surfaces (plane, graphs, catenoid, helicoid)
meshing     structured triangulations and P1 stiffness/mass assembly
quadrature  adaptive clipped-cell integration over extrinsic regions
eigensolve  sparse symmetric generalized eigensolver (shift-invert Lanczos)
diagnostics volume growth, curvature audits, normal-alignment estimates
weyl        almost-eigenfunction schedules and residual certification
pohozaev    integral-identity audits for eigenvalue absence
bdgg        Bombieri-De Giorgi-Giusti barrier construction
cli         command line entry point and report writers
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "geometry",
    "surfaces",
    "meshing",
    "quadrature",
    "eigensolve",
    "diagnostics",
    "weyl",
    "pohozaev",
    "bdgg",
    "cli",
    "errors",
)


def __getattr__(name):
    # Lazy imports keep `import minlap` cheap and let the CLI set thread
    # environment variables before numpy is first loaded.
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f"{__name__}.{name}")
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
