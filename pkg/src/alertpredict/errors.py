"""Exception types shared across the package."""

from __future__ import annotations


class AlertPredictError(Exception):
    """Base class for all package-specific errors."""


class MalformedLineError(AlertPredictError):
    """A line of an input alert file could not be parsed.

    Carries the file path, 1-based line number and a human-readable reason.
    """

    def __init__(self, path: str, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")


class DimensionMismatchError(AlertPredictError):
    """Two artifacts that must agree on a dimension do not."""


class PipelineStageError(AlertPredictError):
    """A pipeline stage failed; names the stage and the underlying cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
