"""
Fixed-timestep game loop of the embedded simulator.

Each game tick runs ``log_interval / dt_physics`` physics sub-steps and then
logs every actor. Time is an integer tick counter scaled at output, and the
loop never reads the wall clock.
"""
from __future__ import annotations

import logging
import time

import numpy as np

from simvar.app.minisim.injectors import EnvironmentContext, InjectorRuntime
from simvar.app.minisim.navmesh import Navmesh, densify, plan_path
from simvar.app.minisim.physics import PROFILES, ActorState, overlapping, resolve_collision, step_actor
from simvar.app.minisim.scenario import ActorKind, ScenarioSpec
from simvar.app.trace.model import NO_EVENT, Event, Position, RunTrace, TraceSample
from simvar.utils import format_float

logger = logging.getLogger(__name__)

TIME_DECIMALS = 9


def build_actors(spec: ScenarioSpec, seed: int, runtime: InjectorRuntime) -> list[ActorState]:
    """Initial actor states, with pedestrian routes planned on the navmesh."""
    spawn_rng = np.random.default_rng(seed) if spec.spawn_spread > 0 else None
    navmesh: Navmesh | None = None
    mode = runtime.frontier_mode(spec.astar_mode)
    actors: list[ActorState] = []
    for actor in spec.actors:
        start = actor.start.xy()
        if spawn_rng is not None:
            s = spec.spawn_spread
            start = (start[0] + float(spawn_rng.uniform(-s, s)), start[1] + float(spawn_rng.uniform(-s, s)))

        if actor.kind is ActorKind.VEHICLE:
            if actor.waypoints:
                corners = [p.xy() for p in actor.route_points()]
            else:
                corners = [start, actor.goal.xy()]
            path = densify(corners)
        else:
            navmesh = navmesh or Navmesh(spec.map_bounds, spec.navmesh)
            path = [start]
            current = start
            for target in actor.route_points():
                leg = plan_path(navmesh, current, target.xy(), mode, runtime.rng)
                path.extend(leg[1:])
                current = target.xy()

        profile = PROFILES[actor.kind]
        state = ActorState(
            actor_id=actor.actor_id,
            kind=actor.kind,
            profile=profile,
            radius=actor.radius or profile.radius,
            cruise_speed=actor.cruise_speed,
            path=path,
            x=start[0],
            y=start[1],
            avoidance=actor.avoidance,
        )
        if len(path) > 1:
            _, (tx, ty) = state.tangent()
            speed = actor.cruise_speed if actor.start_speed is None else actor.start_speed
            state.vx, state.vy = speed * tx, speed * ty
        actors.append(state)
    return actors


def _collide(actors: list[ActorState], restitution: float, runtime: InjectorRuntime, events: dict[str, Event]) -> bool:
    hit = False
    for i, a in enumerate(actors):
        for b in actors[i + 1:]:
            if not (a.live and b.live) or not overlapping(a, b):
                continue
            outcome = resolve_collision(a, b, restitution, runtime.impulse_jitter, runtime.rng)
            if outcome is None:
                continue
            hit = True
            a.vx, a.vy = outcome.velocity_a
            b.vx, b.vy = outcome.velocity_b
            a.disabled = b.disabled = True
            for actor in (a, b):
                if actor.actor_id in outcome.destroyed:
                    actor.destroyed = True
                    actor.vx = actor.vy = 0.0
            for actor_id, event in outcome.events.items():
                if event.is_destroyed:
                    events[actor_id] = event
                else:
                    events.setdefault(actor_id, event)
    return hit


def simulate(
    spec: ScenarioSpec,
    seed: int,
    *,
    run_index: int = 0,
    environment: EnvironmentContext | None = None,
    run_id: str | None = None,
) -> RunTrace:
    """
    Runs one scenario to completion.

    With every injector off the sample rows depend only on (spec, seed).

    Raises:
        PathNotFoundError: a pedestrian goal is unreachable.
    """
    environment = environment or EnvironmentContext()
    runtime = InjectorRuntime(spec.injectors, run_index=run_index, environment=environment)
    actors = build_actors(spec, seed, runtime)
    by_id = sorted(actors, key=lambda a: a.actor_id)
    dt = spec.dt_physics
    substeps = spec.substeps
    max_ticks = spec.max_ticks
    glitch = runtime.plan_glitch(max_ticks, len(actors))
    order = runtime.order_source()

    samples: list[TraceSample] = []
    gone: set[str] = set()

    def log(tick: int, events: dict[str, Event]) -> None:
        t = round(tick * spec.log_interval, TIME_DECIMALS)
        for actor in by_id:
            if actor.actor_id in gone:
                continue
            event = events.get(actor.actor_id, NO_EVENT)
            samples.append(TraceSample(t, actor.actor_id, Position(actor.x, actor.y, 0.0), event))
            if actor.destroyed:
                gone.add(actor.actor_id)

    started = time.perf_counter()
    log(0, {})
    physics_steps = 0
    ticks = 0
    collided = False
    for tick in range(1, max_ticks + 1):
        events: dict[str, Event] = {}
        if glitch is not None and glitch.tick == tick:
            target = actors[glitch.actor_index]
            if not target.destroyed:
                target.x += glitch.dx
                target.y += glitch.dy
        for _ in range(runtime.substeps_for_tick(substeps)):
            for actor in actors:
                step_actor(actor, actors, dt, order)
            physics_steps += 1
            collided = _collide(actors, spec.restitution, runtime, events) or collided
        log(tick, events)
        ticks = tick
        if spec.stop_on_collision and collided:
            break
        if all(actor.settled for actor in actors):
            break
    wall_clock = time.perf_counter() - started

    metadata = {
        "physics_steps": str(physics_steps),
        "ticks": str(ticks),
        "actors": ",".join(f"{a.actor_id}:{a.kind.value}" for a in by_id),
        "injectors": runtime.describe(),
        "util_target": format_float(environment.util_target),
        "priority": str(environment.priority),
        "wall_clock_s": f"{wall_clock:.6f}",
        "tick_latency_ms": f"{wall_clock / max(ticks, 1) * 1000:.6f}",
    }
    trace = RunTrace(
        run_id=run_id or f"{spec.scenario_id}-{run_index}",
        scenario_id=spec.scenario_id,
        seed=seed,
        dt_physics=spec.dt_physics,
        log_interval=spec.log_interval,
        samples=tuple(samples),
        metadata=metadata,
    )
    logger.debug(f"Simulated {trace.run_id}: {ticks} ticks, {physics_steps} physics steps")
    return trace


__all__ = ["simulate", "build_actors", "EnvironmentContext"]
