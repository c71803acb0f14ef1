"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class ParavidError(Exception):
    """Base class for all engine errors."""


class ProviderUnavailableError(ParavidError):
    """Transport-level failure that persisted through the retry budget."""


class ProtocolError(ParavidError):
    """The provider answered, but the body violates the wire contract."""


class IngestError(ParavidError):
    """An embedding/concept store file failed validation."""


class EvaluationError(ParavidError):
    """Qrels/run parsing or metric computation failed."""
