"""Exception hierarchy shared by every module of the package."""


class PlasmaFBError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PlasmaFBError, ValueError):
    """Invalid problem, grid or schedule configuration."""


class DimensionError(PlasmaFBError, ValueError):
    """Field shape does not match its grid."""


class ParameterError(PlasmaFBError, ValueError):
    """Out-of-range scalar parameter (e.g. a nonpositive epsilon)."""


class PreconditionError(PlasmaFBError, ValueError):
    """Input violates an operation's documented precondition."""


class RangeError(PlasmaFBError, ValueError):
    """Point, ball or parameter leaves the admissible region."""


class NotInWError(PlasmaFBError, ValueError):
    """Field has no plus part, so the fibering ray is undefined."""


class PathError(PlasmaFBError, RuntimeError):
    """No negative-energy endpoint found along a fibering ray."""


class SolverError(PlasmaFBError, RuntimeError):
    """Linear or nonlinear solver failure.

    ``residual`` carries the best residual norm reached, when known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(SolverError):
    """Iteration cap reached before the residual tolerance."""


class TrivialSolutionError(SolverError):
    """Iterate collapsed onto the trivial branch (no plus set)."""


class OracleError(PlasmaFBError, RuntimeError):
    """Radial shooting oracle could not bracket a solution."""


class InsufficientResolutionError(PlasmaFBError, RuntimeError):
    """Grid too coarse for the requested statistic."""


class SchemaError(PlasmaFBError, ValueError):
    """Stored artifact does not match the expected layout."""
