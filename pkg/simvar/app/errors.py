"""Exception hierarchy shared by every simvar module."""
from __future__ import annotations


class SimvarError(Exception):
    """Base class for all toolkit errors."""


class TraceFormatError(SimvarError, ValueError):
    """A trace stream or trace object violates the trace format."""

    def __init__(self, message: str, row: int | None = None) -> None:
        self.row = row
        if row is not None:
            message = f"{message} at row {row}"
        super().__init__(message)


class AlignmentError(SimvarError):
    """Runs cannot be aligned for the requested actor."""


class MetricsError(SimvarError):
    """A statistic is undefined for the given input."""


class ScenarioError(SimvarError, ValueError):
    """A scenario description is invalid."""


class PathNotFoundError(SimvarError):
    """No traversable path connects start and goal on the navmesh."""


class LoadControlError(SimvarError):
    """The load generator could not reach or leave the requested state."""


class AdapterError(SimvarError):
    """A simulator adapter failed to produce a trace."""

    def __init__(self, message: str, stderr: str = "") -> None:
        self.stderr = stderr
        super().__init__(message)


class CampaignAborted(SimvarError):
    """Too many runs failed for the campaign to be trusted."""

    def __init__(self, message: str, failed: int = 0) -> None:
        self.failed = failed
        super().__init__(message)


class StoreError(SimvarError):
    """A campaign directory is missing or inconsistent."""


__all__ = [
    "SimvarError",
    "TraceFormatError",
    "AlignmentError",
    "MetricsError",
    "ScenarioError",
    "PathNotFoundError",
    "LoadControlError",
    "AdapterError",
    "CampaignAborted",
    "StoreError",
]
