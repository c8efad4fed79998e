"""Exception hierarchy shared across the platform."""

from __future__ import annotations


class GradelineError(Exception):
    """Base class for all platform errors."""


class UnknownId(GradelineError):
    """A referenced record id does not exist."""

    def __init__(self, collection: str, record_id: str):
        super().__init__(f"unknown {collection} id: {record_id}")
        self.collection = collection
        self.record_id = record_id


class ValidationFailed(GradelineError):
    """A record violates domain invariants.

    ``violations`` is a list of (field, rule) pairs naming each offense.
    """

    def __init__(self, message: str, violations: list[tuple[str, str]] | None = None):
        super().__init__(message)
        self.violations = violations or []


class DuplicateId(GradelineError):
    """An id collides with an existing record."""


class Conflict(GradelineError):
    """The operation conflicts with current store state."""


class StorageUnavailable(GradelineError):
    """The backing store cannot serve reads or writes."""


class IoError(GradelineError):
    """A filesystem operation failed."""


class ConfigError(GradelineError):
    """Invalid or missing configuration."""


class NoSharedTests(GradelineError):
    """Two runs have no comparable tests in common."""


class RunNotCompleted(GradelineError):
    """Reporting requested on a run that has not completed."""


class GatewayError(GradelineError):
    """Base for model-endpoint failures; names the model and purpose."""

    def __init__(self, message: str, *, model: str = "", purpose: str = "", attempt_count: int = 1):
        super().__init__(message)
        self.model = model
        self.purpose = purpose
        self.attempt_count = attempt_count


class TransportError(GatewayError):
    """Endpoint unreachable or returned a failure status (after retries)."""


class GatewayTimeout(TransportError):
    """Per-request deadline exceeded (after retries)."""


class ProtocolError(GatewayError):
    """Endpoint replied 2xx but the body is missing expected fields."""
