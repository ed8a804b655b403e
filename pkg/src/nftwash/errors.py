"""Exception types raised across the package."""

from __future__ import annotations


class WashError(Exception):
    """Base class for all errors raised by nftwash."""


class LedgerError(WashError, ValueError):
    pass


class MalformedRow(LedgerError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NegativeValue(MalformedRow):
    pass


class MissingField(LedgerError):
    def __init__(self, field: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}missing required field {field!r}")


class MixedCollections(LedgerError):
    pass


class DuplicateKey(LedgerError):
    pass


class EmptyHistory(WashError, ValueError):
    pass


class LabelMismatch(WashError, ValueError):
    pass


class NoPath(WashError):
    """The ownership chain between two edges is broken."""


class InfeasibleSpec(WashError, ValueError):
    pass


class TooLarge(WashError, ValueError):
    pass


class UnknownToken(WashError, KeyError):
    pass
