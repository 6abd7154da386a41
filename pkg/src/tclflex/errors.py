class TclFlexError(Exception):
    """Base class for all package errors."""


class InvalidInputError(TclFlexError, ValueError):
    pass


class SchemaError(TclFlexError, ValueError):
    """Raised when a price/profile file does not follow the expected layout."""


class ParseError(TclFlexError, ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(TclFlexError, ValueError):
    pass


class SolverError(TclFlexError, RuntimeError):
    """A solve did not return a usable incumbent.

    ``status`` is the backend status string; ``hint`` names the constraint
    family most likely responsible when the model is infeasible.
    """

    def __init__(self, message: str, status: str = "error", hint: str | None = None):
        self.status = status
        self.hint = hint
        if hint:
            message = f"{message} (hint: {hint})"
        super().__init__(message)
