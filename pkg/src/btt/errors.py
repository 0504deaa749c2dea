"""Exception types shared across the package."""


class BttError(Exception):
    """Base class for all package errors."""


class InvalidInput(BttError, ValueError):
    """An argument violates an operation's preconditions."""


class InvariantViolation(BttError, ValueError):
    """Parsed or constructed data breaks a documented invariant."""


class ParseError(BttError, ValueError):
    """A record line could not be parsed.

    Carries the 1-based line number when known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TraceIOError(BttError, OSError):
    """A trace sink or source failed at the I/O level."""


class NoSuchTrial(BttError, KeyError):
    """A trial id is unknown to the scheduler."""
