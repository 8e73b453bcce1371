"""
Point-mass actor dynamics, path following and collision response.

All "forces" are accelerations (per unit mass); mass only enters the
collision impulse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from simvar.app.minisim.navmesh import XY
from simvar.app.minisim.pid import LATERAL_GAINS, SPEED_GAINS, PidState, pid_step
from simvar.app.minisim.scenario import ActorKind, AvoidanceSpec
from simvar.app.trace.model import Event


@dataclass(frozen=True, slots=True)
class KindProfile:
    mass: float
    radius: float
    actuator_lag: float
    max_accel: float
    max_lateral_speed: float
    drag: float
    rolling_decel: float


PROFILES: dict[ActorKind, KindProfile] = {
    ActorKind.VEHICLE: KindProfile(1500.0, 1.0, 0.2, 3.0, 2.0, 0.01, 0.5),
    ActorKind.PEDESTRIAN: KindProfile(80.0, 0.3, 0.1, 1.5, 1.0, 0.01, 2.0),
}

# Permutes the four velocity terms of one axis; None keeps the natural order.
OrderSource = Callable[[], Sequence[int]] | None


def _clamp(value: float, bound: float) -> float:
    return min(max(value, -bound), bound)


@dataclass(slots=True)
class ActorState:
    actor_id: str
    kind: ActorKind
    profile: KindProfile
    radius: float
    cruise_speed: float
    path: list[XY]
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    segment: int = 0
    avoidance: AvoidanceSpec | None = None
    lateral_pid: PidState = field(default_factory=lambda: PidState(LATERAL_GAINS))
    speed_pid: PidState = field(default_factory=lambda: PidState(SPEED_GAINS))
    finished: bool = False
    destroyed: bool = False
    disabled: bool = False

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def live(self) -> bool:
        """Still moving and collidable."""
        return not (self.finished or self.destroyed)

    @property
    def settled(self) -> bool:
        return self.finished or self.destroyed or (self.disabled and self.vx == 0.0 and self.vy == 0.0)

    def tangent(self) -> tuple[XY, XY]:
        """(segment start, unit direction) of the current path segment."""
        a = self.path[self.segment]
        b = self.path[min(self.segment + 1, len(self.path) - 1)]
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        if length == 0:
            return a, (1.0, 0.0)
        return a, ((b[0] - a[0]) / length, (b[1] - a[1]) / length)

    def advance_segment(self) -> None:
        """Moves to the segment the actor is currently over; flags arrival past the goal."""
        last = len(self.path) - 2
        if last < 0:
            self.finished = True
            return
        while True:
            a = self.path[self.segment]
            b = self.path[self.segment + 1]
            ex, ey = b[0] - a[0], b[1] - a[1]
            along = (self.x - a[0]) * ex + (self.y - a[1]) * ey
            if along < ex * ex + ey * ey:
                return
            if self.segment == last:
                self.finished = True
                return
            self.segment += 1


def target_speed(actor: ActorState, others: Sequence[ActorState]) -> float:
    """Cruise speed, scaled down linearly inside the avoidance range."""
    if actor.avoidance is None:
        return actor.cruise_speed
    nearest = min(
        (math.hypot(o.x - actor.x, o.y - actor.y) for o in others if o is not actor and o.live),
        default=math.inf,
    )
    span = actor.avoidance.range_m - actor.avoidance.stop_range_m
    factor = min(max((nearest - actor.avoidance.stop_range_m) / span, 0.0), 1.0)
    return actor.cruise_speed * factor


def _accumulate(terms: Sequence[float], order: Sequence[int] | None) -> float:
    total = 0.0
    for i in order if order is not None else range(len(terms)):
        total += terms[i]
    return total


def step_actor(actor: ActorState, others: Sequence[ActorState], dt: float, order: OrderSource = None) -> None:
    """One semi-implicit Euler sub-step of a live actor."""
    if not actor.live:
        return
    if actor.disabled:
        _coast(actor, dt)
        return

    actor.advance_segment()
    if actor.finished:
        actor.vx = actor.vy = 0.0
        return
    a, (tx, ty) = actor.tangent()
    nx, ny = -ty, tx
    cross_track = (actor.x - a[0]) * nx + (actor.y - a[1]) * ny
    v_long = actor.vx * tx + actor.vy * ty
    v_lat = actor.vx * nx + actor.vy * ny
    p = actor.profile

    lat_cmd, actor.lateral_pid = pid_step(actor.lateral_pid, cross_track, dt)
    lat_target = -_clamp(lat_cmd, p.max_lateral_speed)
    speed_cmd, actor.speed_pid = pid_step(actor.speed_pid, target_speed(actor, others) - v_long, dt)
    accel = _clamp(speed_cmd, p.max_accel)
    lat_accel = (lat_target - v_lat) / p.actuator_lag

    terms_x = (actor.vx, accel * tx * dt, lat_accel * nx * dt, -p.drag * actor.vx * dt)
    terms_y = (actor.vy, accel * ty * dt, lat_accel * ny * dt, -p.drag * actor.vy * dt)
    actor.vx = _accumulate(terms_x, order() if order else None)
    actor.vy = _accumulate(terms_y, order() if order else None)
    actor.x += actor.vx * dt
    actor.y += actor.vy * dt


def _coast(actor: ActorState, dt: float) -> None:
    speed = actor.speed
    decel = actor.profile.rolling_decel * dt
    if speed < decel or speed == 0.0:
        actor.vx = actor.vy = 0.0
        return
    scale = (speed - decel) / speed
    actor.vx *= scale
    actor.vy *= scale
    actor.x += actor.vx * dt
    actor.y += actor.vy * dt


@dataclass(frozen=True)
class CollisionOutcome:
    velocity_a: XY
    velocity_b: XY
    events: dict[str, Event]
    destroyed: tuple[str, ...] = ()


def overlapping(a: ActorState, b: ActorState) -> bool:
    return math.hypot(b.x - a.x, b.y - a.y) < a.radius + b.radius


def resolve_collision(
    a: ActorState,
    b: ActorState,
    restitution: float,
    jitter: float = 0.0,
    rng: np.random.Generator | None = None,
) -> CollisionOutcome | None:
    """
    Impulse along the centre line for two overlapping actors.

    Returns None when the pair is already separating. A pedestrian hit by a
    vehicle is destroyed; the vehicle records the collision. With ``jitter``
    > 0 every post-impulse velocity component gets a uniform perturbation in
    [-jitter, jitter] drawn from ``rng``.
    """
    dx, dy = b.x - a.x, b.y - a.y
    distance = math.hypot(dx, dy)
    if distance == 0:
        nx, ny = 1.0, 0.0
    else:
        nx, ny = dx / distance, dy / distance
    approach = (a.vx - b.vx) * nx + (a.vy - b.vy) * ny
    if approach <= 0:
        return None
    ma, mb = a.profile.mass, b.profile.mass
    j = (1.0 + restitution) * approach / (1.0 / ma + 1.0 / mb)
    va = [a.vx - j / ma * nx, a.vy - j / ma * ny]
    vb = [b.vx + j / mb * nx, b.vy + j / mb * ny]
    if jitter > 0:
        if rng is None:
            raise ValueError("collision jitter needs a random generator")
        for v in (va, vb):
            v[0] += jitter * float(rng.uniform(-1.0, 1.0))
            v[1] += jitter * float(rng.uniform(-1.0, 1.0))

    destroyed: list[str] = []
    events = {a.actor_id: Event.collision(b.actor_id), b.actor_id: Event.collision(a.actor_id)}
    for victim, striker in ((a, b), (b, a)):
        if victim.kind is ActorKind.PEDESTRIAN and striker.kind is ActorKind.VEHICLE:
            events[victim.actor_id] = Event.destroyed()
            destroyed.append(victim.actor_id)
    return CollisionOutcome((va[0], va[1]), (vb[0], vb[1]), events, tuple(destroyed))


__all__ = [
    "KindProfile",
    "PROFILES",
    "ActorState",
    "CollisionOutcome",
    "target_speed",
    "step_actor",
    "overlapping",
    "resolve_collision",
]
