"""Exception hierarchy shared across the package."""

from __future__ import annotations


class KgcertError(Exception):
    """Base class for all package errors."""


class FormatError(KgcertError):
    """A record file contains a line that cannot be parsed."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class EmptyGraphError(KgcertError):
    """No edges survived preprocessing."""


class PoolTooSmallError(KgcertError):
    """Fewer qualifying pivot candidates than requested."""


class NoPathError(KgcertError):
    """The pivot's subgraph admits no path satisfying the sampling constraints."""


class InsufficientCandidatesError(KgcertError):
    """Fewer than two answer options can be produced for a path."""


class QueryEvidenceOverflowError(KgcertError):
    """The mandatory query-evidence sentences alone exceed the token budget."""


class ModelClientError(KgcertError):
    """Base class for model-endpoint failures."""


class ModelTimeoutError(ModelClientError):
    """The endpoint did not answer in time (includes connection failures)."""


class HttpStatusError(ModelClientError):
    """The endpoint returned a non-retryable or persistently failing HTTP status."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}" + (f": {message}" if message else ""))
        self.status = status


class MalformedResponseError(ModelClientError):
    """The endpoint answered with a body the client cannot interpret."""


class CertificationError(KgcertError):
    """A certification run could not complete (e.g. sample re-draws exhausted)."""
