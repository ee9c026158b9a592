"""I-VT eye-movement event detection and Gaze Relational Index metrics."""

from .errors import (
    AssignmentError,
    ConfigError,
    DataError,
    DegenerateGeometryError,
    FormatError,
    GazeError,
    InsufficientDataError,
    OrderingError,
    ZeroFixationError,
)
from .events import EventGroup, group_events, merge_fixations, segment
from .ivt import IvtConfig, MidpointSample, MidpointStream, SampleLabel, label_stream, velocity_stream
from .metrics import GroupMetrics, PersonMetrics, group_metrics, person_metrics
from .model import (
    EyeSample,
    GazeSample,
    GroupAssignment,
    Recording,
    parse_recording,
    serialize_recording,
    validate,
    window,
)
from .sweep import SweepCell, SweepTable, analyze, group_contrast, rank_order, run_sweep

__version__ = "0.1.0"
