"""Exception and warning types shared across the package."""


class MinlapError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficientError(MinlapError):
    """Chart differential is rank deficient at the requested point."""


class BaseCoincidesError(MinlapError):
    """Base point coincides with the surface point; extrinsic distance vanishes."""


class UnsupportedKindError(MinlapError):
    """Surface catalog does not know the requested kind."""


class DegenerateChartError(MinlapError):
    """Chart produced a degenerate (near zero area) element."""


class DegenerateTriangleError(MinlapError):
    """Mesh contains a triangle with near zero embedded area."""


class TruncationTooSmallError(MinlapError):
    """Requested extrinsic region provably exits the truncated chart."""


class NoConvergenceError(MinlapError):
    """Iterative solver exhausted its iteration budget."""


class SingularMassError(MinlapError):
    """Mass matrix is numerically singular."""


class InvalidRatioError(MinlapError):
    """Volume growth ratios are inconsistent (need C_n >= F_n > 0)."""


class QuadratureFailureError(MinlapError):
    """Adaptive quadrature failed to reach its tolerance."""


class NewtonDivergedError(MinlapError):
    """Damped Newton iteration failed to reduce the residual."""


class NegativeCError(MinlapError):
    """Curvature decay constant must be nonnegative."""


class NotIntegrableError(MinlapError):
    """Sampled function shows no evidence of a finite integral."""


class InvalidParamsError(MinlapError):
    """Parameter set is flagged invalid for the requested construction."""


class ConfigParseError(MinlapError):
    """Run configuration could not be parsed or validated."""


class TruncatedDomainWarning(UserWarning):
    """Extrinsic region comes close to the chart truncation boundary."""
