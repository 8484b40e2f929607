"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ErloopError(Exception):
    """Base class for all errors raised by this package."""


class TotalMassVanished(ErloopError):
    """Every partition's probability collapsed to (numerically) zero."""


class EmptyAttributeSchema(ErloopError):
    """Similarity scoring was asked to run over records with no attributes."""


class UnknownRecord(ErloopError, KeyError):
    """A record id was referenced that the dataset does not contain."""

    def __str__(self) -> str:  # KeyError quotes its arg; keep the message readable
        return Exception.__str__(self)


class PoolTooLarge(ErloopError):
    """Exhaustive selection was asked to enumerate an intractable pool."""


class UnparseableAnswer(ErloopError):
    """The oracle's reply could not be reduced to a yes/no verdict.

    ``tokens_charged`` carries tokens already billed for the attempts.
    """

    def __init__(self, message: str, *, tokens_charged: int = 0):
        super().__init__(message)
        self.tokens_charged = tokens_charged


class TransportError(ErloopError):
    """The LLM endpoint could not be reached after the configured retries.

    ``tokens_charged`` carries the tokens already billed for the failed
    attempts so callers can reconcile their budget.
    """

    def __init__(self, message: str, *, attempts: int = 1, tokens_charged: int = 0):
        super().__init__(message)
        self.attempts = attempts
        self.tokens_charged = tokens_charged


class AuthError(ErloopError):
    """The LLM endpoint rejected our credentials."""


class ParseError(ErloopError):
    """A records, truth, or config document is malformed.

    ``row`` is 1-based and refers to the physical line in the source when
    known.
    """

    def __init__(self, message: str, *, source: str | None = None, row: int | None = None):
        loc = ""
        if source is not None:
            loc = f" ({source}" + (f", line {row})" if row is not None else ")")
        super().__init__(message + loc)
        self.source = source
        self.row = row


class DanglingId(ParseError):
    """A truth pair references a record id absent from the dataset."""


class EmptyTruth(ErloopError):
    """Precision/recall are undefined: the ground truth has no matching pairs."""


class ConfigError(ErloopError):
    """A run configuration document is invalid."""
