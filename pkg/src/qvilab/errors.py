"""Exception hierarchy shared by all solver layers."""


class QviError(Exception):
    """Base class for every error raised by qvilab."""


class PreconditionError(QviError, ValueError):
    """An input violates a documented precondition."""


class DomainMismatchError(PreconditionError):
    """Two discrete functions live on different grids."""


class ConvergenceError(QviError):
    """An iterative solver ran out of iterations.

    The last iterate, its residual and (for outer loops) the trace are
    kept so the caller can inspect how far the solve got.
    """

    def __init__(self, message, iterate=None, residual=None, trace=None, step=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
        self.trace = trace
        self.step = step


class MonotonicityError(QviError):
    """A monotone iteration left its expected direction beyond the slack."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class AssumptionRefusal(QviError):
    """The instance lacks a structural property the operation relies on."""


class ConfigError(QviError):
    """Malformed or out-of-range experiment configuration."""

    def __init__(self, message, line=None, field=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field
