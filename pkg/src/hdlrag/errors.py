"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: domain errors exit 1,
usage errors exit 2 (click), environment errors exit 3.
"""

from __future__ import annotations


class HdlragError(Exception):
    """Base class for all domain errors raised by this package."""


class CorpusError(HdlragError):
    """Malformed corpus or documents file."""


class IndexFormatError(HdlragError):
    """Index file is not readable: bad magic, version, truncation, checksum."""


class ProviderError(HdlragError):
    """A provider (embedding or completion) failed.

    ``retriable`` distinguishes transient transport problems from
    definitive provider answers such as refusals.
    """

    def __init__(self, message: str, *, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class TransportError(ProviderError):
    """Network-level failure talking to a remote provider."""

    def __init__(self, message: str):
        super().__init__(message, retriable=True)


class RefusalError(ProviderError):
    """Provider answered but declined to complete the request."""

    def __init__(self, message: str):
        super().__init__(message, retriable=False)


class EnvironmentGapError(HdlragError):
    """A required external tool or resource is absent (not a result label)."""


class BudgetError(HdlragError):
    """Prompt budget cannot hold even the non-droppable parts."""
