"""Exception hierarchy shared by every drgkit module."""

from __future__ import annotations


class DrgkitError(Exception):
    """Base class; the CLI maps these to exit status 1."""


class CatalogParseError(DrgkitError, ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CatalogConflictError(DrgkitError, ValueError):
    pass


class InconsistentCatalogError(DrgkitError, ValueError):
    pass


class NotFoundError(DrgkitError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ConfigurationError(DrgkitError, ValueError):
    pass


class IncompleteReviewError(DrgkitError, ValueError):
    pass


class ReviewValidationError(DrgkitError, ValueError):
    pass


class ModeMismatchError(DrgkitError, ValueError):
    pass


class NonFiniteGradientError(DrgkitError, FloatingPointError):
    pass
