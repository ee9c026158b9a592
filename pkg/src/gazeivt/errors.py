"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class GazeError(Exception):
    """Base class for every error raised by gazeivt."""


class ConfigError(GazeError, ValueError):
    """Invalid configuration value (thresholds, rates, geometry)."""


class DataError(GazeError, ValueError):
    """Input data cannot be processed."""


class FormatError(DataError):
    """Input text does not follow the expected file format.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OrderingError(DataError):
    """Timestamps (or time arguments) are not strictly increasing."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(DataError):
    """Not enough samples, events or members for the requested computation."""


class DegenerateGeometryError(DataError):
    """A gaze vector has (near) zero length, so no angle is defined."""


class ZeroFixationError(DataError):
    """No fixation groups were found, so mean duration and GRI are undefined."""

    def __init__(self, participant_id: str):
        self.participant_id = participant_id
        super().__init__(f"participant {participant_id!r} has no fixations; GRI undefined")


class AssignmentError(DataError):
    """A participant is missing from (or duplicated in) a group assignment."""
