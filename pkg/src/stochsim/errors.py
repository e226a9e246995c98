"""Exception hierarchy shared by all modules."""


class StochSimError(Exception):
    """Base class for library errors."""


class ShapeError(StochSimError, ValueError):
    pass


class DomainError(StochSimError, ValueError):
    pass


class SizeError(StochSimError, ValueError):
    """Raised when an exhaustive enumeration would be too large."""


class ConvergenceError(StochSimError, RuntimeError):
    """An iterative solver did not converge.

    The last iterate is kept on ``last`` so callers can inspect it.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class DegeneracyError(StochSimError, RuntimeError):
    pass


class ImpossibleSequenceError(DomainError):
    """A sequence (or past) has zero probability under the model."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class CompressionError(StochSimError, RuntimeError):
    pass


class TrainingError(StochSimError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
