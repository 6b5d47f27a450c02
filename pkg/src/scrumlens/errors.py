"""Exception hierarchy.

The CLI maps the three top-level families onto exit codes:
``DataError`` -> 3, ``ForgeError`` -> 4, missing files -> 2.
"""

from __future__ import annotations


class DataError(Exception):
    """Input data failed validation."""


class ValidationError(DataError, ValueError):
    """A value violates a domain constraint (range, uniqueness, ordering)."""


class ParseError(DataError):
    """A record could not be parsed. Carries the 1-based line number when known."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ReferentialError(DataError):
    """A record references an entity that does not exist in the dataset."""


class WindowLookupError(LookupError):
    """No sprint window is defined for the requested (team, sprint)."""


class UndefinedStatisticError(ValueError):
    """The requested statistic is undefined for the given data (e.g. a fully tied variable)."""


class ForgeError(Exception):
    """Base class for failures talking to the forge API."""


class AuthError(ForgeError):
    """HTTP 401/403 not caused by rate limiting."""


class RateLimitError(ForgeError):
    """Rate limit would require waiting longer than the configured budget. Retryable."""

    retryable = True


class TransportError(ForgeError):
    """Network-level failure or unexpected HTTP status."""
