"""Exception types used across the package."""


class NepratError(Exception):
    """Base class for all package errors."""


class InvalidSamplesError(NepratError):
    """Sample set unusable for fitting (too few points, all values non-finite, ...)."""


class NumericalDegeneracyError(NepratError):
    """A numerically degenerate factorization (e.g. an all-zero least-squares factor)."""


class PoleEvaluationError(NepratError):
    """A rational function was evaluated at one of its poles."""


class ExpressionError(NepratError):
    """Scalar-expression parse or evaluation failure."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (position {position})"
        super().__init__(message)
        self.position = position


class MatrixFileError(NepratError):
    """Malformed or unusable matrix file."""


class EvaluationError(NepratError):
    """Evaluating a problem failed; carries the index of the offending term."""

    def __init__(self, message, term_index=None):
        super().__init__(message)
        self.term_index = term_index


class ConfigError(NepratError):
    """Problem configuration file is invalid."""


class PoleShiftError(NepratError):
    """A requested shift collides with a pole of a rational interpolant."""

    def __init__(self, message, shift=None, pole=None, term_index=None):
        super().__init__(message)
        self.shift = shift
        self.pole = pole
        self.term_index = term_index


class ShiftIsEigenvalueError(NepratError):
    """The shifted problem matrix is singular to machine precision."""


class RecoveryFailureError(NepratError):
    """Eigenvector recovery found a numerically zero leading block."""


class DimensionGuardError(NepratError):
    """A dense verification was requested for a problem that is too large."""
