"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``InputError`` (and subclasses) -> 2,
``ResourceError`` -> 3.
"""

from __future__ import annotations


class ConelabError(Exception):
    """Base class for all library errors."""


class InputError(ConelabError, ValueError):
    """Malformed or out-of-contract input."""


class ParseError(InputError):
    """Syntax error in a textual input, with the offending position."""

    def __init__(self, message: str, text: str = "", position: int | None = None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class DomainError(InputError):
    """Input is well formed but outside the mathematical domain of the operation."""


class UnsupportedGermError(DomainError):
    """Germ lies outside the supported exp/poly/log fragment."""


class OutOfRangeError(InputError):
    """A requested element lies outside a computed finite region."""


class ResourceError(ConelabError):
    """A configured resource cap would be exceeded."""

    def __init__(self, message: str, radius: int | None = None):
        self.radius = radius
        super().__init__(message)
