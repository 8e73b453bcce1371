"""
Line-oriented trace file format.

    #simvar-trace v1
    #meta run_id=r0;scenario_id=test1;seed=0;dt_physics=0.05;log_interval=0.1;...
    t,actor_id,x,y,z,event

Floats use the shortest round-trip decimal so parse(write(x)) is bit-identical.
"""
from __future__ import annotations

import hashlib
import logging
import re
from pathlib import Path
from urllib.parse import unquote

from simvar.app.errors import TraceFormatError
from simvar.app.trace.model import (
    RESERVED_META_KEYS,
    Event,
    Position,
    RunTrace,
    TraceSample,
    check_id,
)
from simvar.utils import format_float

logger = logging.getLogger(__name__)

HEADER = "#simvar-trace v1"
META_PREFIX = "#meta "
TRACE_SUFFIX = ".trace"

_NUMBER = re.compile(r"-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?")
_ESCAPES = {"%": "%25", ";": "%3B", "=": "%3D", "\n": "%0A", "\r": "%0D"}


def _encode_meta_value(value: str) -> str:
    # % first so the escapes themselves are not re-encoded
    for raw, escaped in _ESCAPES.items():
        value = value.replace(raw, escaped)
    return value


def _parse_number(text: str, row: int, column: str) -> float:
    if not _NUMBER.fullmatch(text):
        raise TraceFormatError(f"malformed {column} {text!r}", row=row)
    return float(text)


def _format_row(sample: TraceSample) -> str:
    p = sample.position
    return ",".join(
        (
            format_float(sample.t),
            sample.actor_id,
            format_float(p.x),
            format_float(p.y),
            format_float(p.z),
            sample.event.to_text(),
        )
    )


def _body(trace: RunTrace) -> str:
    return "".join(_format_row(s) + "\n" for s in trace.samples)


def write_trace(trace: RunTrace) -> bytes:
    """Serializes a valid trace to UTF-8 bytes with "\\n" line endings."""
    trace.validate()
    meta: list[tuple[str, str]] = [
        ("run_id", trace.run_id),
        ("scenario_id", trace.scenario_id),
        ("seed", str(trace.seed)),
        ("dt_physics", format_float(trace.dt_physics)),
        ("log_interval", format_float(trace.log_interval)),
    ]
    meta.extend(sorted(trace.metadata.items()))
    meta_line = META_PREFIX + ";".join(f"{k}={_encode_meta_value(v)}" for k, v in meta)
    return (HEADER + "\n" + meta_line + "\n" + _body(trace)).encode("utf-8")


def parse_trace(data: bytes | str) -> RunTrace:
    """
    Inverse of write_trace.

    Row numbers in errors are 1-based line numbers of the file.

    Raises:
        TraceFormatError: malformed header or row, non-monotone time,
            duplicate (t, actor_id) or any other violated invariant.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise TraceFormatError(f"trace is not UTF-8: {e}") from e
    else:
        text = data
    if text.endswith("\n"):
        text = text[:-1]
    lines = text.split("\n")
    if not lines or lines[0] != HEADER:
        raise TraceFormatError(f"missing {HEADER!r} header", row=1)
    if len(lines) < 2 or not lines[1].startswith(META_PREFIX):
        raise TraceFormatError("missing #meta line", row=2)

    meta = _parse_meta(lines[1][len(META_PREFIX):])
    try:
        seed = int(meta.pop("seed"))
        dt_physics = _parse_number(meta.pop("dt_physics"), 2, "dt_physics")
        log_interval = _parse_number(meta.pop("log_interval"), 2, "log_interval")
        run_id = meta.pop("run_id")
        scenario_id = meta.pop("scenario_id")
    except KeyError as e:
        raise TraceFormatError(f"missing meta key {e.args[0]}", row=2) from e
    except ValueError as e:
        if isinstance(e, TraceFormatError):
            raise
        raise TraceFormatError(f"malformed seed: {e}", row=2) from e

    samples: list[TraceSample] = []
    previous: tuple[float, str] | None = None
    for row, line in enumerate(lines[2:], start=3):
        fields = line.split(",")
        if len(fields) != 6:
            raise TraceFormatError(f"expected 6 fields, found {len(fields)}", row=row)
        t = _parse_number(fields[0], row, "t")
        actor_id = fields[1]
        if not actor_id:
            raise TraceFormatError("empty actor_id", row=row)
        try:
            check_id(actor_id, "actor_id")
            position = Position(
                _parse_number(fields[2], row, "x"),
                _parse_number(fields[3], row, "y"),
                _parse_number(fields[4], row, "z"),
            )
            event = Event.from_text(fields[5])
        except TraceFormatError as e:
            if e.row is not None:
                raise
            raise TraceFormatError(str(e), row=row) from e
        if previous is not None:
            if t < previous[0]:
                raise TraceFormatError("non-monotone time", row=row)
            if (t, actor_id) == previous:
                raise TraceFormatError(f"duplicate sample ({fields[0]}, {actor_id})", row=row)
            if t == previous[0] and actor_id < previous[1]:
                raise TraceFormatError("actor_id out of order", row=row)
        previous = (t, actor_id)
        samples.append(TraceSample(t, actor_id, position, event))

    trace = RunTrace(
        run_id=run_id,
        scenario_id=scenario_id,
        seed=seed,
        dt_physics=dt_physics,
        log_interval=log_interval,
        samples=tuple(samples),
        metadata=meta,
    )
    return trace.validate()


def _parse_meta(text: str) -> dict[str, str]:
    meta: dict[str, str] = {}
    if not text:
        return meta
    for item in text.split(";"):
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise TraceFormatError(f"malformed meta entry {item!r}", row=2)
        if key in meta:
            raise TraceFormatError(f"repeated meta key {key!r}", row=2)
        meta[key] = unquote(value)
    return meta


def fingerprint(trace: RunTrace) -> str:
    """SHA-256 over the sample rows only; equal fingerprints mean identical runs."""
    return hashlib.sha256(_body(trace).encode("utf-8")).hexdigest()


def write_trace_file(trace: RunTrace, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_trace(trace))
    logger.debug(f"Trace {trace.run_id} written to {path}")
    return path


def read_trace_file(path: Path) -> RunTrace:
    path = Path(path)
    try:
        return parse_trace(path.read_bytes())
    except TraceFormatError as e:
        error = TraceFormatError(f"{path.name}: {e}")
        error.row = e.row
        raise error from e


__all__ = [
    "HEADER",
    "TRACE_SUFFIX",
    "write_trace",
    "parse_trace",
    "fingerprint",
    "write_trace_file",
    "read_trace_file",
    "RESERVED_META_KEYS",
]
