"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SpaError(Exception):
    """Base class for all errors raised by the package."""


class SortError(SpaError):
    """A term or assertion violates a sort constraint."""


class InvalidPosition(SpaError):
    pass


class NotSanitized(SpaError):
    pass


class NotPure(SpaError):
    pass


class Inconsistent(SpaError):
    pass


class VariableCapture(SpaError):
    pass


class MalformedAtom(SpaError):
    pass


class InvalidProof(SpaError):
    pass


class NotNormal(SpaError):
    pass


class InvalidRun(SpaError):
    pass


class MalformedProtocol(SpaError):
    pass


class BoundExceeded(SpaError):
    pass


class ParseError(SpaError):
    """Syntax or resolution error with a source location."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{line}:{col}: {message}" if line else message)


class UnresolvedIdentifier(ParseError):
    pass
