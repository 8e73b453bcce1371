"""Campaign configuration, manifest and sweep result models."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

from simvar.app.config import get_settings
from simvar.app.loadgen.controller import LoadTarget
from simvar.app.metrics.audit import AuditResult
from simvar.app.minisim.catalog import CATALOG
from simvar.app.minisim.scenario import ScenarioSpec, resolve_scenario
from simvar.utils import format_float

SEED_LIMIT = 2**64


class SeedPolicy(str, Enum):
    FIXED = "fixed_single_seed"
    PER_RUN = "per_run_seed"


def _default_tolerance() -> float:
    return get_settings().tolerance_m


class CampaignConfig(BaseModel):
    """One environment configuration of a campaign."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: str = "test1"
    scenario_spec: ScenarioSpec | None = None
    injectors: dict[str, Any] = Field(default_factory=dict)
    n: int = Field(default=100, ge=2)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    seed_policy: SeedPolicy = SeedPolicy.FIXED
    load: LoadTarget = Field(default_factory=LoadTarget)
    priority: int = Field(default=0, ge=-20, le=19)
    pinning: tuple[int, ...] | None = None
    tolerance: float = Field(default_factory=_default_tolerance, gt=0)
    stop_on_collision: bool = False
    config_id: str | None = Field(default=None, pattern=r"^[A-Za-z0-9_.-]+$")

    @field_validator("pinning")
    @classmethod
    def cores_non_negative(cls, v: tuple[int, ...] | None) -> tuple[int, ...] | None:
        if v is not None and (not v or min(v) < 0):
            raise ValueError("pinning must list non-negative core ids")
        return v

    @property
    def scenario_id(self) -> str:
        if self.scenario_spec is not None:
            return self.scenario_spec.scenario_id
        if self.scenario in CATALOG:
            return self.scenario
        return self.scenario_model().scenario_id

    @property
    def id(self) -> str:
        """Explicit config_id, or one derived from scenario, load, priority and pinning."""
        if self.config_id:
            return self.config_id
        parts = [self.scenario_id, f"load{format_float(self.load.cpu_percent)}", f"nice{self.priority}"]
        if self.pinning:
            parts.append("pin" + "_".join(str(c) for c in self.pinning))
        return "-".join(parts)

    def scenario_model(self) -> ScenarioSpec:
        """The scenario with this configuration's overrides applied."""
        spec = self.scenario_spec or resolve_scenario(self.scenario)
        if self.stop_on_collision:
            spec = spec.with_overrides(stop_on_collision=True)
        if self.injectors:
            spec = spec.with_injectors(**self.injectors)
        return spec

    def seed_for(self, run_index: int) -> int:
        if self.seed_policy is SeedPolicy.FIXED:
            return self.seed
        return (self.seed + run_index) % SEED_LIMIT

    def replace(self, **updates: Any) -> "CampaignConfig":
        """Validated copy; the derived config_id is recomputed unless given."""
        data = self.model_dump()
        data["config_id"] = None
        data.update(updates)
        return CampaignConfig.model_validate(data)


class CampaignManifest(BaseModel):
    """Everything needed to re-analyze a campaign from its stored traces."""

    campaign_id: str
    kind: str
    created_at: str
    toolkit_version: str
    adapter: str
    factor: str | None = None
    configs: dict[str, CampaignConfig] = Field(default_factory=dict)
    order: list[str] = Field(default_factory=list)
    levels: dict[str, float] = Field(default_factory=dict)
    baseline_config_id: str | None = None
    parallel: bool = False

    def add(self, config: CampaignConfig, level: float | None = None) -> None:
        if config.id in self.configs:
            raise ValueError(f"duplicate config_id {config.id} in campaign {self.campaign_id}")
        self.configs[config.id] = config
        self.order.append(config.id)
        if level is not None:
            self.levels[config.id] = level


@dataclass(frozen=True)
class SweepEntry:
    config_id: str
    level: float
    result: AuditResult


@dataclass(frozen=True)
class SweepResult:
    """One AuditResult per configuration, ordered by the swept factor."""

    factor: str
    entries: tuple[SweepEntry, ...]
    noise_floor: float | None = None
    campaign_id: str | None = None

    @property
    def domain_boundary(self) -> float | None:
        """Highest level such that it and every lower level are permissible."""
        boundary = None
        for entry in self.entries:
            if not entry.result.verdict.is_permissible:
                break
            boundary = entry.level
        return boundary


__all__ = [
    "SeedPolicy",
    "CampaignConfig",
    "CampaignManifest",
    "SweepEntry",
    "SweepResult",
]
