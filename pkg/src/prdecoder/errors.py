"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input failed a precondition check."""


class DimensionError(ValidationError):
    """Array shapes or frame sizes are incompatible."""


class FormatError(ValueError):
    """A persisted array file is malformed."""


class DivergenceError(RuntimeError):
    """An iterative solver produced non-finite values.

    The partial loss trace is kept on ``trace`` for diagnosis.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
