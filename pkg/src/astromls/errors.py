"""Exception hierarchy shared by every module."""


class AstromlsError(Exception):
    """Base class; the CLI maps any subclass to the data-error exit code."""


class ParameterError(AstromlsError, ValueError):
    """An argument is out of its documented range or shapes disagree."""


class ParseError(AstromlsError):
    """Malformed CSV input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(AstromlsError):
    """Header or column-kind problems (duplicate names, empty input, ...)."""


class ImputationError(AstromlsError):
    """A column cannot be imputed because it has no observed cells."""
