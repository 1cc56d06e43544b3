"""Exception types shared across the package."""


class SteersimError(Exception):
    """Base class for all package errors."""


class InvariantError(SteersimError, ValueError):
    """A record violates one of its invariants; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(SteersimError, ValueError):
    """A line of an input file could not be parsed."""

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class ConfigError(SteersimError, ValueError):
    """Configuration validation failure; ``path`` is the dotted field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class SchemaMismatchError(SteersimError, ValueError):
    pass


class ClassStarvedError(SteersimError, ValueError):
    """A dataset lacks one of the two classes needed for training or scoring."""


class CalibrationError(SteersimError, RuntimeError):
    pass
