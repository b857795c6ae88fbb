"""Exception hierarchy shared across the package.

Configuration problems (bad input, schema violations) and numerical
failures (blown-up runs, CFL violations) are kept distinct so the CLI can
map them to different exit codes.
"""


class VortexError(Exception):
    """Base class for all package errors."""


class ConfigError(VortexError):
    """Invalid configuration or malformed input data."""


class ValidationError(ConfigError):
    """Input data violating a documented precondition (e.g. negative density)."""


class NumericalError(VortexError):
    """A numerical failure during a run (NaN, instability, ...)."""


class StepSizeError(NumericalError):
    """CFL-type stability bound violated; carries the offending bound."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class SingularityError(VortexError):
    """Evaluation of a singular kernel at its singular point."""


class GridMismatchError(VortexError):
    """Two gridded objects do not live on the same grid."""


class TimeRangeError(VortexError):
    """Requested time outside the span of a trajectory."""
