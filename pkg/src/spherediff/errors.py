"""Exception hierarchy.

Three families map onto the CLI exit codes: configuration problems (2),
data problems (3), and numeric failures (4).
"""


class SphereDiffError(Exception):
    exit_code = 1


class ConfigError(SphereDiffError):
    exit_code = 2


class DataError(SphereDiffError):
    exit_code = 3


class NumericError(SphereDiffError):
    exit_code = 4


class InvalidLength(ConfigError, ValueError):
    """A schedule or parameter list has an unusable length."""


class DimensionMismatch(DataError, ValueError):
    """Operands live on spheres of different dimension."""


class EmptyMixture(DataError, ValueError):
    """A mixture needs at least one component."""


class UnknownLabel(DataError, KeyError):
    """A sample's class label has no fitted statistics."""


class MeanPlacementFailed(DataError):
    """Could not place class means with the requested angular margin."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonUnitVector(DataError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DegenerateVector(NumericError, ValueError):
    """A vector with (near-)zero norm cannot define a direction."""


class DegenerateMean(NumericError, ValueError):
    """Points cancel; the spherical mean is undefined."""


class DegenerateCone(NumericError, ValueError):
    """A cone of zero angular radius cannot support the operation."""


class ZeroVector(NumericError, ValueError):
    """An angular loss needs nonzero vectors."""


class RejectionBudgetExceeded(NumericError, RuntimeError):
    """Rejection sampling stalled; parameters are numerically extreme."""


class NonFiniteLoss(NumericError, RuntimeError):
    """Training produced a NaN or infinite loss."""


class EmptyAfterExclusion(NumericError, ValueError):
    """No sample fell inside any class cone."""
