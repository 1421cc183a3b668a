"""Exception hierarchy shared by every module in the package."""


class BackShiftError(Exception):
    """Base class for all errors raised by this package."""


class InsufficientData(BackShiftError, ValueError):
    pass


class NeedMultipleEnvironments(BackShiftError, ValueError):
    pass


class ShapeError(BackShiftError, ValueError):
    pass


class ContractViolation(BackShiftError, ValueError):
    pass


class NumericalBreakdown(BackShiftError, ArithmeticError):
    pass


class TooLargeForExact(BackShiftError, ValueError):
    pass


class Infeasible(BackShiftError):
    """No finite-cost perfect assignment exists."""


class ModelAssumptionsViolated(BackShiftError):
    """The raw diagonalizer cannot be projected onto unit-diagonal, CP < 1 matrices."""


class EstimateUnavailable(BackShiftError):
    """Raised when a downstream step needs a non-empty connectivity estimate."""


class GenerationFailed(BackShiftError):
    pass


class StabilityFailed(BackShiftError):
    pass


class ParseError(BackShiftError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IoError(BackShiftError, OSError):
    pass
