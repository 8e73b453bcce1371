"""
Declarative scenario description for the embedded simulator, with its
YAML file form (first line ``#simvar-scenario v1``).
"""
from __future__ import annotations

import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from simvar.app.errors import ScenarioError

logger = logging.getLogger(__name__)

SCENARIO_HEADER = "#simvar-scenario v1"
ID_REGEX = r"^[A-Za-z0-9_.-]+$"
# Ratios such as log_interval / dt_physics are accepted within this distance of an integer.
RATIO_TOLERANCE = 1e-9


def _integer_ratio(a: float, b: float) -> int | None:
    ratio = a / b
    k = round(ratio)
    if k < 1 or abs(ratio - k) > RATIO_TOLERANCE * max(1.0, ratio):
        return None
    return k


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Point(_Model):
    x: float
    y: float
    z: float = 0.0

    @field_validator("x", "y", "z")
    @classmethod
    def finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("coordinates must be finite")
        return v

    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


class MapBounds(_Model):
    width: float = Field(gt=0)
    height: float = Field(gt=0)

    def contains(self, p: Point) -> bool:
        return 0 <= p.x <= self.width and 0 <= p.y <= self.height


class Rect(_Model):
    """Axis-aligned blocked area in metres; cells whose centre lies inside are blocked."""

    x0: float
    y0: float
    x1: float
    y1: float


class NavmeshSpec(_Model):
    cell_size: float = Field(default=1.0, gt=0)
    blocked_cells: list[tuple[int, int]] = Field(default_factory=list)
    blocked_rects: list[Rect] = Field(default_factory=list)


class ActorKind(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"


class FrontierMode(str, Enum):
    STABLE = "stable_insertion_order"
    HEAP = "heap_order_deterministic"
    RANDOM = "random_tiebreak"


class AvoidanceSpec(_Model):
    range_m: float = Field(gt=0)
    stop_range_m: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def stop_inside_range(self) -> "AvoidanceSpec":
        if self.stop_range_m >= self.range_m:
            raise ValueError("stop_range_m must be smaller than range_m")
        return self


class ActorSpec(_Model):
    """
    One actor. Vehicles follow ``waypoints`` (or the straight line from start
    to goal); pedestrians plan on the navmesh from start through each
    waypoint, or to goal.
    """

    actor_id: str = Field(pattern=ID_REGEX)
    kind: ActorKind
    start: Point
    goal: Point | None = None
    waypoints: list[Point] | None = None
    cruise_speed: float = Field(gt=0)
    radius: float | None = Field(default=None, gt=0)
    start_speed: float | None = Field(default=None, ge=0)
    avoidance: AvoidanceSpec | None = None

    @model_validator(mode="after")
    def has_route(self) -> "ActorSpec":
        if self.goal is None and not self.waypoints:
            raise ValueError(f"actor {self.actor_id} needs a goal or waypoints")
        if self.kind is ActorKind.VEHICLE and self.waypoints is not None and len(self.waypoints) < 2:
            raise ValueError(f"vehicle {self.actor_id} needs at least 2 waypoints")
        return self

    def route_points(self) -> list[Point]:
        points = list(self.waypoints or [])
        if self.goal is not None:
            points.append(self.goal)
        return points


class InjectorConfig(_Model):
    """Switchable sources of non-determinism; all off by default."""

    sum_order_shuffle: bool = False
    timestep_jitter: bool = False
    timestep_jitter_probability: float = Field(default=0.0, ge=0, le=1)
    timestep_jitter_load_threshold: float | None = Field(default=None, ge=0, le=100)
    astar_random_tiebreak: bool = False
    collision_impulse_jitter: float = Field(default=0.0, ge=0)
    glitch_probability: float = Field(default=0.0, ge=0, le=1)
    glitch_magnitude: float = Field(default=1.0, ge=0)
    entropy_seed: int | None = Field(default=None, ge=0, lt=2**64)

    @property
    def any_enabled(self) -> bool:
        return bool(self.enabled_names())

    def enabled_names(self) -> list[str]:
        names: list[str] = []
        if self.sum_order_shuffle:
            names.append("sum_order_shuffle")
        if self.timestep_jitter and self.timestep_jitter_probability > 0:
            label = f"timestep_jitter={self.timestep_jitter_probability}"
            if self.timestep_jitter_load_threshold is not None:
                label += f">{self.timestep_jitter_load_threshold}"
            names.append(label)
        if self.astar_random_tiebreak:
            names.append("astar_random_tiebreak")
        if self.collision_impulse_jitter > 0:
            names.append(f"collision_impulse_jitter={self.collision_impulse_jitter}")
        if self.glitch_probability > 0 and self.glitch_magnitude > 0:
            names.append(f"glitch={self.glitch_probability}x{self.glitch_magnitude}")
        return names


class ScenarioSpec(_Model):
    scenario_id: str = Field(pattern=ID_REGEX)
    description: str = ""
    map_bounds: MapBounds
    navmesh: NavmeshSpec = Field(default_factory=NavmeshSpec)
    actors: list[ActorSpec] = Field(min_length=1)
    dt_physics: float = Field(default=0.05, gt=0)
    log_interval: float = Field(default=0.1, gt=0)
    max_sim_time: float = Field(default=15.0, gt=0)
    stop_on_collision: bool = False
    restitution: float = Field(default=0.5, ge=0, le=1)
    spawn_spread: float = Field(default=0.0, ge=0)
    astar_mode: FrontierMode = FrontierMode.STABLE
    injectors: InjectorConfig = Field(default_factory=InjectorConfig)

    @model_validator(mode="after")
    def check_consistency(self) -> "ScenarioSpec":
        if _integer_ratio(self.log_interval, self.dt_physics) is None:
            raise ValueError("log_interval must be a positive integer multiple of dt_physics")
        if _integer_ratio(self.max_sim_time, self.log_interval) is None:
            raise ValueError("max_sim_time must be a positive integer multiple of log_interval")
        if self.astar_mode is FrontierMode.RANDOM:
            raise ValueError("random tie-breaking is an injector (injectors.astar_random_tiebreak)")
        ids = [a.actor_id for a in self.actors]
        if len(set(ids)) != len(ids):
            raise ValueError("actor ids must be unique")
        for actor in self.actors:
            for point in [actor.start, *actor.route_points()]:
                if not self.map_bounds.contains(point):
                    raise ValueError(f"actor {actor.actor_id}: point ({point.x}, {point.y}) outside the map")
        return self

    @property
    def substeps(self) -> int:
        """Physics sub-steps per logged game tick."""
        return _integer_ratio(self.log_interval, self.dt_physics)

    @property
    def max_ticks(self) -> int:
        return _integer_ratio(self.max_sim_time, self.log_interval)

    def with_overrides(self, **updates: Any) -> "ScenarioSpec":
        """Validated copy with top-level fields replaced."""
        return _validate({**self.model_dump(), **updates})

    def with_injectors(self, **overrides: Any) -> "ScenarioSpec":
        try:
            injectors = InjectorConfig.model_validate({**self.injectors.model_dump(), **overrides})
        except ValidationError as e:
            raise ScenarioError(f"invalid injector settings: {e}") from e
        return self.with_overrides(injectors=injectors.model_dump())


def _validate(data: Any) -> ScenarioSpec:
    try:
        return ScenarioSpec.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(f"invalid scenario: {e}") from e


def dump_scenario(spec: ScenarioSpec) -> str:
    body = yaml.safe_dump(spec.model_dump(mode="json"), sort_keys=False, default_flow_style=None)
    return f"{SCENARIO_HEADER}\n{body}"


def load_scenario(text: str) -> ScenarioSpec:
    """
    Parses a scenario document.

    Raises:
        ScenarioError: missing header, bad YAML or failed validation.
    """
    first_line = text.split("\n", 1)[0].strip()
    if first_line != SCENARIO_HEADER:
        raise ScenarioError(f"scenario file must start with {SCENARIO_HEADER!r}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError(f"scenario is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a mapping")
    return _validate(data)


def read_scenario_file(path: Path) -> ScenarioSpec:
    return load_scenario(Path(path).read_text(encoding="utf-8"))


def write_scenario_file(spec: ScenarioSpec, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_scenario(spec), encoding="utf-8", newline="\n")
    return path


def resolve_scenario(ref: str) -> ScenarioSpec:
    """Accepts a catalog id (test1..test6) or a path to a scenario file."""
    from simvar.app.minisim.catalog import CATALOG

    if ref in CATALOG:
        return CATALOG[ref]()
    path = Path(ref)
    if path.is_file():
        logger.info(f"Loading scenario file {path}")
        return read_scenario_file(path)
    raise ScenarioError(f"unknown scenario {ref!r}: not a catalog id ({', '.join(CATALOG)}) nor a file")


__all__ = [
    "SCENARIO_HEADER",
    "Point",
    "MapBounds",
    "Rect",
    "NavmeshSpec",
    "ActorKind",
    "FrontierMode",
    "AvoidanceSpec",
    "ActorSpec",
    "InjectorConfig",
    "ScenarioSpec",
    "dump_scenario",
    "load_scenario",
    "read_scenario_file",
    "write_scenario_file",
    "resolve_scenario",
]
