"""Exception hierarchy shared by every module."""


class RobustOrderError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RobustOrderError, ValueError):
    """Raised when inputs violate a documented precondition."""


class ParseError(InvalidInputError):
    """Raised when a text dataset cannot be parsed.

    The offending 1-based line number is kept in ``lineno``.
    """

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ConfigurationError(RobustOrderError, ValueError):
    """Raised for unknown strategies or inconsistent parameter sets."""


class ResourceLimitError(RobustOrderError, RuntimeError):
    """Raised when a hard input-size guard is exceeded."""
