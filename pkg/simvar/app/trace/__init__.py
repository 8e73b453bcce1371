"""Simulation trace model, file codec and cross-run alignment."""
from simvar.app.trace.align import align
from simvar.app.trace.codec import (
    fingerprint,
    parse_trace,
    read_trace_file,
    write_trace,
    write_trace_file,
)
from simvar.app.trace.model import (
    AlignedSeries,
    Event,
    EventKind,
    FailedRun,
    NO_EVENT,
    Position,
    RunSet,
    RunTrace,
    TraceSample,
)

__all__ = [
    "align",
    "fingerprint",
    "parse_trace",
    "read_trace_file",
    "write_trace",
    "write_trace_file",
    "AlignedSeries",
    "Event",
    "EventKind",
    "FailedRun",
    "NO_EVENT",
    "Position",
    "RunSet",
    "RunTrace",
    "TraceSample",
]
