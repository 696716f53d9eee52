"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FtdistError(Exception):
    """Base class for every error raised by this package."""


class GraphError(FtdistError, ValueError):
    """Malformed graph, cut, weighting or demand."""


class ResourceError(FtdistError):
    """A configured resource cap was exceeded (path enumeration, LP backend)."""


class ConstructionError(FtdistError):
    """A structural guarantee could not be met during construction."""


class CorruptLabelError(FtdistError):
    """Label contents are internally inconsistent."""


class ParseError(FtdistError):
    """Malformed serialized input; ``offset`` is the byte position of the failure."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class VersionError(ParseError):
    """Serialized input carries an unknown magic string or format version."""


class UsageError(FtdistError):
    """An operation was invoked against state it was not prepared for."""
