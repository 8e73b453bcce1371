"""Repeated-run campaigns against a simulator adapter under controlled environments."""
from simvar.app.orchestrate.adapters import (
    AdapterKind,
    BaseSimulatorAdapter,
    EmbeddedAdapter,
    ExternalAdapter,
    RunOutcome,
    RunRequest,
    SimulatorAdapterRegistry,
)
from simvar.app.orchestrate.campaign import (
    CampaignAnalysis,
    analyze_campaign,
    check_one_factor,
    escalate_sample_size,
    escalation_stages,
    run_campaign,
    run_repeats,
    sweep_priority,
    sweep_utilization,
)
from simvar.app.orchestrate.controls import ControlSnapshot, ProcessControls
from simvar.app.orchestrate.models import (
    CampaignConfig,
    CampaignManifest,
    SeedPolicy,
    SweepEntry,
    SweepResult,
)
from simvar.app.orchestrate.store import CampaignStore

__all__ = [
    "AdapterKind",
    "BaseSimulatorAdapter",
    "EmbeddedAdapter",
    "ExternalAdapter",
    "RunOutcome",
    "RunRequest",
    "SimulatorAdapterRegistry",
    "CampaignAnalysis",
    "analyze_campaign",
    "check_one_factor",
    "escalate_sample_size",
    "escalation_stages",
    "run_campaign",
    "run_repeats",
    "sweep_priority",
    "sweep_utilization",
    "ControlSnapshot",
    "ProcessControls",
    "CampaignConfig",
    "CampaignManifest",
    "SeedPolicy",
    "SweepEntry",
    "SweepResult",
    "CampaignStore",
]
