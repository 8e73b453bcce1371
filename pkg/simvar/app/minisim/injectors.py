"""
Per-run runtime of the non-determinism injectors.

Each run draws from its own generator: ``default_rng([entropy_seed,
run_index])`` when an entropy seed is configured, OS entropy otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from simvar.app.minisim.scenario import FrontierMode, InjectorConfig


@dataclass(frozen=True)
class EnvironmentContext:
    """Campaign environment visible to load-coupled injectors."""

    util_target: float = 0.0
    priority: int = 0


@dataclass(frozen=True, slots=True)
class Glitch:
    tick: int
    actor_index: int
    dx: float
    dy: float


class InjectorRuntime:
    def __init__(
        self,
        config: InjectorConfig,
        run_index: int = 0,
        environment: EnvironmentContext | None = None,
    ) -> None:
        self.config = config
        self.environment = environment or EnvironmentContext()
        if config.entropy_seed is not None:
            self.rng = np.random.default_rng([config.entropy_seed, run_index])
        else:
            self.rng = np.random.default_rng()

    @property
    def jitter_probability(self) -> float:
        """Chance of dropping or duplicating a sub-step in one tick."""
        c = self.config
        if not c.timestep_jitter:
            return 0.0
        if c.timestep_jitter_load_threshold is None:
            return c.timestep_jitter_probability
        if self.environment.util_target <= c.timestep_jitter_load_threshold:
            return 0.0
        pressure = (self.environment.priority + 20) / 20
        return min(max(c.timestep_jitter_probability * pressure, 0.0), 1.0)

    def substeps_for_tick(self, nominal: int) -> int:
        p = self.jitter_probability
        if p <= 0 or self.rng.random() >= p:
            return nominal
        if nominal > 1 and self.rng.random() < 0.5:
            return nominal - 1
        return nominal + 1

    def order_source(self):
        """Callable returning a shuffled accumulation order, or None when shuffling is off."""
        if not self.config.sum_order_shuffle:
            return None
        return lambda: self.rng.permutation(4).tolist()

    @property
    def impulse_jitter(self) -> float:
        return self.config.collision_impulse_jitter

    def frontier_mode(self, base: FrontierMode) -> FrontierMode:
        return FrontierMode.RANDOM if self.config.astar_random_tiebreak else base

    def plan_glitch(self, max_ticks: int, actors: int) -> Glitch | None:
        c = self.config
        if c.glitch_probability <= 0 or c.glitch_magnitude <= 0:
            return None
        if self.rng.random() >= c.glitch_probability:
            return None
        tick = int(self.rng.integers(1, max_ticks + 1))
        actor_index = int(self.rng.integers(0, actors))
        angle = float(self.rng.uniform(0.0, 2.0 * math.pi))
        return Glitch(tick, actor_index, c.glitch_magnitude * math.cos(angle), c.glitch_magnitude * math.sin(angle))

    def describe(self) -> str:
        names = self.config.enabled_names()
        if not names:
            return "none"
        seed = self.config.entropy_seed
        source = "os_entropy" if seed is None else f"entropy_seed={seed}"
        return ",".join(names) + f",{source}"


__all__ = ["EnvironmentContext", "Glitch", "InjectorRuntime"]
