"""Exception types shared across the package."""


class GraspFieldError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(GraspFieldError, ValueError):
    """An argument violates a documented precondition."""


class NumericFailureError(GraspFieldError, ArithmeticError):
    """An iterative solver produced non-finite values."""


class ParseError(GraspFieldError, ValueError):
    """A file could not be parsed; carries location information."""

    def __init__(self, message, path=None, line=None, offset=None):
        detail = message
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            detail = f"{message} ({', '.join(where)})"
        super().__init__(detail)
        self.path = path
        self.line = line
        self.offset = offset


class DegenerateViewError(GraspFieldError, ValueError):
    """A partial-view synthesis culled every point."""
