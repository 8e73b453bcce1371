"""
Simulation trace data model.

A RunTrace is the time series of every actor position logged during one
simulation execution; a RunSet groups the repeated executions of one
scenario under one configuration.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping

from simvar.app.errors import AlignmentError, TraceFormatError

ID_PATTERN = re.compile(r"[A-Za-z0-9_.-]+")
RESERVED_META_KEYS = ("run_id", "scenario_id", "seed", "dt_physics", "log_interval")
SEED_LIMIT = 2**64
# Sample times are written with 9 decimals, so tick recovery tolerates this much.
TICK_TOLERANCE = 1e-6


def check_id(value: str, what: str) -> str:
    if not isinstance(value, str) or not ID_PATTERN.fullmatch(value):
        raise TraceFormatError(f"invalid {what}: {value!r}")
    return value


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise TraceFormatError(f"non-finite position ({self.x}, {self.y}, {self.z})")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


class EventKind(str, Enum):
    NONE = "none"
    COLLISION = "collision"
    DESTROYED = "destroyed"


@dataclass(frozen=True, slots=True)
class Event:
    kind: EventKind = EventKind.NONE
    other: str | None = None

    def __post_init__(self) -> None:
        if self.kind is EventKind.COLLISION:
            check_id(self.other, "collision partner")
        elif self.other is not None:
            raise TraceFormatError(f"event {self.kind.value} cannot name another actor")

    @classmethod
    def collision(cls, other: str) -> "Event":
        return cls(EventKind.COLLISION, other)

    @classmethod
    def destroyed(cls) -> "Event":
        return cls(EventKind.DESTROYED)

    @property
    def is_collision(self) -> bool:
        return self.kind is EventKind.COLLISION

    @property
    def is_destroyed(self) -> bool:
        return self.kind is EventKind.DESTROYED

    def to_text(self) -> str:
        if self.kind is EventKind.COLLISION:
            return f"collision:{self.other}"
        return self.kind.value

    @classmethod
    def from_text(cls, text: str) -> "Event":
        if text == "none":
            return NO_EVENT
        if text == "destroyed":
            return cls.destroyed()
        if text.startswith("collision:"):
            return cls.collision(text[len("collision:"):])
        raise TraceFormatError(f"unknown event {text!r}")


NO_EVENT = Event()


@dataclass(frozen=True, slots=True)
class TraceSample:
    t: float
    actor_id: str
    position: Position
    event: Event = NO_EVENT


@dataclass(frozen=True)
class RunTrace:
    """One simulation execution: identity, timing and the ordered samples."""

    run_id: str
    scenario_id: str
    seed: int
    dt_physics: float
    log_interval: float
    samples: tuple[TraceSample, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.samples, tuple):
            object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "metadata", {str(k): str(v) for k, v in self.metadata.items()})

    def tick_of(self, t: float) -> int:
        """Integer tick index of a sample time; raises when t is off the logging grid."""
        ratio = t / self.log_interval
        tick = round(ratio)
        if abs(ratio - tick) > TICK_TOLERANCE:
            raise TraceFormatError(f"time {t} is not a multiple of log_interval {self.log_interval}")
        return tick

    def validate(self) -> "RunTrace":
        """Checks every trace invariant and returns the trace unchanged."""
        check_id(self.run_id, "run_id")
        check_id(self.scenario_id, "scenario_id")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < SEED_LIMIT:
            raise TraceFormatError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        for name in ("dt_physics", "log_interval"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise TraceFormatError(f"{name} must be positive, got {value}")
        ratio = self.log_interval / self.dt_physics
        if round(ratio) < 1 or abs(ratio - round(ratio)) > TICK_TOLERANCE:
            raise TraceFormatError(
                f"log_interval {self.log_interval} is not a positive multiple of dt_physics {self.dt_physics}"
            )
        for key in self.metadata:
            check_id(key, "metadata key")
            if key in RESERVED_META_KEYS:
                raise TraceFormatError(f"metadata key {key!r} is reserved")

        last_tick: dict[str, int] = {}
        destroyed: set[str] = set()
        previous: tuple[float, str] | None = None
        for index, sample in enumerate(self.samples):
            check_id(sample.actor_id, "actor_id")
            if sample.t < 0:
                raise TraceFormatError(f"negative time {sample.t} for {sample.actor_id}")
            key = (sample.t, sample.actor_id)
            if previous is not None:
                if key == previous:
                    raise TraceFormatError(f"duplicate sample ({sample.t}, {sample.actor_id})")
                if key < previous:
                    raise TraceFormatError(f"samples not sorted by (t, actor_id) at sample {index}")
            previous = key
            tick = self.tick_of(sample.t)
            if sample.actor_id in destroyed:
                raise TraceFormatError(f"sample for {sample.actor_id} after its destruction at t={sample.t}")
            last = last_tick.get(sample.actor_id)
            if last is not None and tick != last + 1:
                raise TraceFormatError(f"gap in samples of {sample.actor_id} before t={sample.t}")
            last_tick[sample.actor_id] = tick
            if sample.event.is_destroyed:
                destroyed.add(sample.actor_id)
        return self

    @property
    def actors(self) -> list[str]:
        return sorted({s.actor_id for s in self.samples})

    def samples_for(self, actor_id: str) -> list[TraceSample]:
        return [s for s in self.samples if s.actor_id == actor_id]

    def collision_times(self) -> list[float]:
        return [s.t for s in self.samples if s.event.is_collision]

    def collisions(self) -> list[tuple[str, str]]:
        """Unordered collision pairs, sorted."""
        pairs = {tuple(sorted((s.actor_id, s.event.other))) for s in self.samples if s.event.is_collision}
        return sorted(pairs)

    def with_metadata(self, **updates: object) -> "RunTrace":
        merged = dict(self.metadata)
        merged.update({k: str(v) for k, v in updates.items()})
        return replace(self, metadata=merged)


@dataclass(frozen=True, slots=True)
class FailedRun:
    index: int
    reason: str


@dataclass(frozen=True)
class RunSet:
    """Repeated runs of one scenario under one configuration."""

    scenario_id: str
    config_id: str
    runs: tuple[RunTrace, ...]
    failed: tuple[FailedRun, ...] = ()

    @property
    def n(self) -> int:
        return len(self.runs)

    @property
    def log_interval(self) -> float | None:
        return self.runs[0].log_interval if self.runs else None

    @property
    def actors(self) -> list[str]:
        return sorted({a for run in self.runs for a in run.actors})

    @classmethod
    def from_traces(
        cls,
        traces: Iterable[RunTrace],
        *,
        config_id: str = "default",
        scenario_id: str | None = None,
        failed: Iterable[FailedRun] = (),
    ) -> "RunSet":
        runs = tuple(traces)
        if not runs and scenario_id is None:
            raise AlignmentError("cannot build a run set from no traces without a scenario_id")
        scenario_id = scenario_id or runs[0].scenario_id
        for run in runs:
            if run.scenario_id != scenario_id:
                raise AlignmentError(f"run {run.run_id} belongs to {run.scenario_id}, not {scenario_id}")
            if run.dt_physics != runs[0].dt_physics or run.log_interval != runs[0].log_interval:
                raise AlignmentError(f"run {run.run_id} uses different timing than run {runs[0].run_id}")
        return cls(scenario_id=scenario_id, config_id=config_id, runs=runs, failed=tuple(failed))


@dataclass(frozen=True)
class AlignedSeries:
    """Positions of one actor grouped by identical sample time across runs."""

    actor_id: str
    n: int
    times: tuple[float, ...]
    positions_by_time: tuple[tuple[Position, ...], ...]
    presence_count: tuple[int, ...]

    def usable(self, index: int) -> bool:
        return self.presence_count[index] >= 2

    @property
    def usable_times(self) -> list[float]:
        return [t for i, t in enumerate(self.times) if self.usable(i)]

    @property
    def partial(self) -> bool:
        """True when the actor is missing from some run at some time."""
        return any(count < self.n for count in self.presence_count)


__all__ = [
    "ID_PATTERN",
    "RESERVED_META_KEYS",
    "Position",
    "EventKind",
    "Event",
    "NO_EVENT",
    "TraceSample",
    "RunTrace",
    "FailedRun",
    "RunSet",
    "AlignedSeries",
    "check_id",
]
