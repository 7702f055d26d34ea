"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`MocsimError` so callers can
catch one base class at API boundaries.  Engine-level faults carry a short
``code`` string that survives into run results and error classification.
"""
from __future__ import annotations


class MocsimError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSpec(MocsimError):
    """A motion spec has non-positive limits or an out-of-range ratio."""


class DegenerateGeometry(MocsimError):
    """A path segment collapses: zero length, zero radius, coincident points."""


class DimensionMismatch(MocsimError):
    """Point, axis list, or series dimensions disagree."""


class InvalidConfig(MocsimError):
    """A device config violates axis or I/O channel limits."""


class EngineError(MocsimError):
    """Runtime fault inside the engine.  ``code`` names the fault kind."""

    code = "EngineError"


class AxisBusy(EngineError):
    code = "AxisBusy"


class UnknownAxis(EngineError):
    code = "UnknownAxis"


class UnknownBit(EngineError):
    code = "UnknownBit"


class UnknownEvent(EngineError):
    code = "UnknownEvent"


class UnknownChannel(EngineError):
    code = "UnknownChannel"


class DuplicateEvent(EngineError):
    code = "DuplicateEvent"


class EventAlreadyLatched(EngineError):
    code = "EventAlreadyLatched"


class WrongPhase(EngineError):
    code = "WrongPhase"


class TimeoutExceeded(EngineError):
    code = "Timeout"


class AlreadyLogging(EngineError):
    code = "AlreadyLogging"


class NotLogging(EngineError):
    code = "NotLogging"


class UnknownCommand(EngineError):
    """A statement reached the dispatcher without a matching engine call."""

    code = "UnknownCommand"


class BadArgument(EngineError):
    """A statement argument could not be coerced at dispatch time."""

    code = "BadArgument"


class EmptyLog(MocsimError):
    """A trajectory log with zero rows was passed where data is required."""


class EmptySeries(MocsimError):
    """An empty series was passed to a distance computation."""


class EmptyInput(MocsimError):
    """An aggregate metric was requested over zero outcomes."""


class EmptyIndex(MocsimError):
    """A search index holds no chunks."""


class BothEmpty(MocsimError):
    """Rank fusion received no candidates from either retriever."""


class GeneratorUnavailable(MocsimError):
    """A generator cannot produce code (missing fixture, no endpoint)."""


class RemoteError(MocsimError):
    """A remote generation endpoint failed."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class IoFailure(MocsimError):
    """Reading or writing an artifact on disk failed."""


class SchemaError(MocsimError):
    """A dataset or index file does not match the expected schema."""


class EmptyDataset(MocsimError):
    """A dataset file contains no tasks."""


class CanonicalCodeBroken(MocsimError):
    """One or more dataset reference programs fail validation or execution."""

    def __init__(self, task_ids: list[str], details: list[str] | None = None):
        self.task_ids = list(task_ids)
        self.details = list(details or [])
        joined = ", ".join(self.task_ids)
        super().__init__(f"reference code broken for tasks: {joined}")
