"""
Built-in scenarios test1..test6 on a 50 m x 30 m map with a 15 s horizon.

    test1  two vehicles on crossing paths, timed apart       no collision
    test2  two vehicles on crossing paths, timed to meet     vehicle-vehicle collision
    test3  test1 plus a pedestrian crossing behind v1        no collision
    test4  vehicle hits a pedestrian; a following vehicle
           with avoidance is not involved                    vehicle-pedestrian collision
    test5  two pedestrians on diagonal navmesh routes        no collision
    test6  two pedestrians walking head-on                   pedestrian-pedestrian collision

Injectors are off in every catalog scenario.
"""
from __future__ import annotations

from typing import Callable

from simvar.app.minisim.scenario import (
    ActorKind,
    ActorSpec,
    AvoidanceSpec,
    MapBounds,
    NavmeshSpec,
    Point,
    Rect,
    ScenarioSpec,
)

MAP = MapBounds(width=50.0, height=30.0)
NAVMESH = NavmeshSpec(
    cell_size=1.0,
    blocked_rects=[Rect(x0=42, y0=20, x1=50, y1=30), Rect(x0=0, y0=22, x1=8, y1=30)],
)
VEHICLE_SPEED = 5.0
WALKING_SPEED = 1.4


def _vehicle(actor_id: str, start: tuple[float, float], goal: tuple[float, float], **extra) -> ActorSpec:
    return ActorSpec(
        actor_id=actor_id,
        kind=ActorKind.VEHICLE,
        start=Point(x=start[0], y=start[1]),
        goal=Point(x=goal[0], y=goal[1]),
        cruise_speed=VEHICLE_SPEED,
        **extra,
    )


def _pedestrian(actor_id: str, start: tuple[float, float], goal: tuple[float, float]) -> ActorSpec:
    return ActorSpec(
        actor_id=actor_id,
        kind=ActorKind.PEDESTRIAN,
        start=Point(x=start[0], y=start[1]),
        goal=Point(x=goal[0], y=goal[1]),
        cruise_speed=WALKING_SPEED,
    )


def _scenario(scenario_id: str, description: str, actors: list[ActorSpec]) -> ScenarioSpec:
    return ScenarioSpec(
        scenario_id=scenario_id,
        description=description,
        map_bounds=MAP,
        navmesh=NAVMESH,
        actors=actors,
        dt_physics=0.05,
        log_interval=0.1,
        max_sim_time=15.0,
    )


def build_test1() -> ScenarioSpec:
    return _scenario(
        "test1",
        "two vehicles, crossing paths, no collision",
        [_vehicle("v1", (2, 10), (48, 10)), _vehicle("v2", (25, 2), (25, 28))],
    )


def build_test2() -> ScenarioSpec:
    return _scenario(
        "test2",
        "two vehicles, crossing paths, vehicle-vehicle collision",
        [_vehicle("v1", (6, 10), (48, 10)), _vehicle("v2", (25, 29), (25, 1))],
    )


def build_test3() -> ScenarioSpec:
    return _scenario(
        "test3",
        "two vehicles and a pedestrian, no collision",
        [
            _vehicle("v1", (2, 10), (48, 10)),
            _vehicle("v2", (25, 2), (25, 28)),
            _pedestrian("ped", (40.5, 1.5), (40.5, 28.5)),
        ],
    )


def build_test4() -> ScenarioSpec:
    return _scenario(
        "test4",
        "vehicle-pedestrian collision with an uninvolved following vehicle",
        [
            _vehicle("v1", (2, 10), (48, 10), avoidance=AvoidanceSpec(range_m=10.0, stop_range_m=4.0)),
            _vehicle("v2", (14, 10), (48, 10)),
            _pedestrian("ped", (32.5, 4.5), (32.5, 27.5)),
        ],
    )


def build_test5() -> ScenarioSpec:
    return _scenario(
        "test5",
        "two pedestrians on diagonal navmesh routes, no collision",
        [_pedestrian("ped1", (5.5, 5.5), (15.5, 20.5)), _pedestrian("ped2", (30.5, 20.5), (20.5, 5.5))],
    )


def build_test6() -> ScenarioSpec:
    return _scenario(
        "test6",
        "two pedestrians head-on, pedestrian-pedestrian collision",
        [_pedestrian("ped1", (10.5, 15.5), (40.5, 15.5)), _pedestrian("ped2", (40.5, 15.5), (10.5, 15.5))],
    )


CATALOG: dict[str, Callable[[], ScenarioSpec]] = {
    "test1": build_test1,
    "test2": build_test2,
    "test3": build_test3,
    "test4": build_test4,
    "test5": build_test5,
    "test6": build_test6,
}

# Scenarios whose baseline runs contain no collision, usable as a noise floor.
COLLISION_FREE = ("test1", "test3", "test5")


__all__ = ["CATALOG", "COLLISION_FREE", "MAP", "NAVMESH"]
