"""Embedded 2D driving simulator with switchable non-determinism injectors."""
from simvar.app.minisim.catalog import CATALOG
from simvar.app.minisim.engine import simulate
from simvar.app.minisim.injectors import EnvironmentContext
from simvar.app.minisim.navmesh import Frontier, Navmesh, plan_path
from simvar.app.minisim.physics import resolve_collision
from simvar.app.minisim.pid import PidGains, PidState, pid_step
from simvar.app.minisim.scenario import (
    ActorKind,
    ActorSpec,
    FrontierMode,
    InjectorConfig,
    ScenarioSpec,
    dump_scenario,
    load_scenario,
    resolve_scenario,
)

__all__ = [
    "CATALOG",
    "simulate",
    "EnvironmentContext",
    "Frontier",
    "Navmesh",
    "plan_path",
    "resolve_collision",
    "PidGains",
    "PidState",
    "pid_step",
    "ActorKind",
    "ActorSpec",
    "FrontierMode",
    "InjectorConfig",
    "ScenarioSpec",
    "dump_scenario",
    "load_scenario",
    "resolve_scenario",
]
