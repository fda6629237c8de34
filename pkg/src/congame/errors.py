"""Exception types shared across the package."""

from __future__ import annotations


class CongameError(Exception):
    """Base class for all package-specific errors."""


class InputError(CongameError, ValueError):
    """Invalid argument or inconsistent domain object."""


class FormatError(CongameError, ValueError):
    """Malformed text file.

    Carries the offending path and 1-based line number when known so CLI
    messages can point at the exact line.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
        elif line is not None:
            prefix = f"line {line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class ResourceLimitError(CongameError):
    """An enumeration would exceed the configured cap."""


class CoverageInfeasibleError(CongameError):
    """A requested run needs a coverage condition the inputs do not satisfy."""

    def __init__(self, message: str, *, uncovered: tuple = ()):
        self.uncovered = uncovered
        super().__init__(message)
