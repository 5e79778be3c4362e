"""Exception hierarchy shared by every module."""


class SphereQPError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SphereQPError, ValueError):
    pass


class ValidationError(SphereQPError, ValueError):
    pass


class NegativeCurvatureError(SphereQPError):
    """The shifted matrix ``Q + sigma*I`` was found not positive definite.

    ``direction`` is a witness ``d`` with ``d^T (Q + sigma*I) d <= 0``.
    """

    def __init__(self, sigma, direction, curvature):
        self.sigma = sigma
        self.direction = direction
        self.curvature = curvature
        super().__init__(
            f"negative curvature {curvature:.3e} at sigma={sigma!r}"
        )


class ConvergenceError(SphereQPError):
    """An iteration hit its cap. ``best`` holds the last iterate, if any."""

    def __init__(self, message, best=None, sigma=None):
        self.best = best
        self.sigma = sigma
        super().__init__(message)


class PoleProximityError(SphereQPError):
    def __init__(self, sigma, message=None):
        self.sigma = sigma
        super().__init__(message or f"non-finite arithmetic near the pole at sigma={sigma!r}")


class LanczosBreakdownError(SphereQPError):
    pass


class CapViolationError(SphereQPError):
    """psi is still positive at the safe upper bound of the multiplier."""

    def __init__(self, sigma_cap, psi):
        self.sigma_cap = sigma_cap
        self.psi = psi
        super().__init__(f"psi({sigma_cap!r}) = {psi:.3e} > 0 at the safe upper bound")


class OracleLimitError(SphereQPError):
    pass


class ParseError(SphereQPError, ValueError):
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
            if column is not None:
                where += f"{column}:"
        super().__init__(f"{where} {message}" if where else message)


class SolverError(SphereQPError):
    """Wraps a failure inside ``solve`` with the pipeline stage it came from."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
