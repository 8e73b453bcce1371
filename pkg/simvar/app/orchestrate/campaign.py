"""
Repeated-run campaigns: single configurations, one-factor sweeps and
sample-size escalation.
"""
from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from datetime import datetime, timezone

from simvar import __version__
from simvar.app.config import get_settings
from simvar.app.errors import AdapterError, CampaignAborted
from simvar.app.loadgen.controller import LoadController, LoadTarget, default_controller
from simvar.app.loadgen.monitor import UtilizationMonitor
from simvar.app.metrics.audit import AuditResult, audit_run_set, noise_floor
from simvar.app.minisim.injectors import EnvironmentContext
from simvar.app.orchestrate.adapters import BaseSimulatorAdapter, RunOutcome, RunRequest
from simvar.app.orchestrate.controls import ControlSnapshot, ProcessControls
from simvar.app.orchestrate.models import (
    CampaignConfig,
    CampaignManifest,
    SweepEntry,
    SweepResult,
)
from simvar.app.orchestrate.store import CampaignStore
from simvar.app.trace.model import FailedRun, RunSet, RunTrace
from simvar.utils import format_core_list, format_float

logger = logging.getLogger(__name__)

BASELINE_PREFIX = "baseline"

# fields of CampaignConfig.model_dump() that each sweep factor may change
FACTOR_FIELDS: dict[str, dict] = {
    "utilization": {"config_id": True, "load": {"cpu_percent"}},
    "priority": {"config_id": True, "priority": True},
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def _new_manifest(
    store: CampaignStore | None,
    campaign_id: str | None,
    kind: str,
    adapter: BaseSimulatorAdapter,
    factor: str | None = None,
    parallel: bool = False,
) -> CampaignManifest:
    if campaign_id is None:
        campaign_id = CampaignStore.new_campaign_id(kind) if store else f"{kind}-memory"
    return CampaignManifest(
        campaign_id=campaign_id,
        kind=kind,
        created_at=_now(),
        toolkit_version=__version__,
        adapter=adapter.describe(),
        factor=factor,
        parallel=parallel,
    )


def run_repeats(
    adapter: BaseSimulatorAdapter,
    config: CampaignConfig,
    *,
    store: CampaignStore | None = None,
    campaign_id: str | None = None,
    load_controller: LoadController | None = None,
    start_index: int = 0,
    parallel: bool = False,
    monitor: UtilizationMonitor | None = None,
) -> RunSet:
    """
    Executes runs ``start_index .. config.n - 1`` of one configuration.

    Load, priority and pinning are applied for the duration of the call and
    the orchestrator's own scheduling state is restored afterwards, also
    when the campaign aborts.

    Returns:
        RunSet: the traces produced by this call, with per-run metadata.

    Raises:
        CampaignAborted: more than the configured fraction of runs failed.
        LoadControlError: the load generator could not be started.
    """
    settings = get_settings()
    controller = load_controller or default_controller()
    monitor = monitor or UtilizationMonitor()
    scenario = config.scenario_model()
    controls = ProcessControls(config.priority, config.pinning)
    environment = EnvironmentContext(util_target=config.load.cpu_percent, priority=config.priority)
    indices = list(range(start_index, config.n))
    abort_after = settings.failure_abort_fraction * config.n
    cid = campaign_id or "adhoc"

    if parallel:
        logger.warning("Parallel runs overlap in time; utilization-controlled results are flagged invalid")
    workers = min(os.cpu_count() or 1, max(len(indices), 1)) if parallel else 1

    traces: list[RunTrace] = []
    failed: list[FailedRun] = []
    snapshot = ControlSnapshot.capture()
    logger.info(
        f"Running {len(indices)} repeats of {config.id} "
        f"(load {format_float(config.load.cpu_percent)}%, priority {config.priority}, "
        f"pinning {format_core_list(config.pinning or ())})"
    )
    handle = None
    try:
        handle = controller.start(config.load)
        adapter.start(controls, workers=workers)

        def requests() -> Iterable[RunRequest]:
            for k in indices:
                yield RunRequest(
                    scenario=scenario,
                    seed=config.seed_for(k),
                    run_index=k,
                    run_id=f"{config.id}-{k}",
                    environment=environment,
                )

        def record(k: int, started_at: str, outcome: RunOutcome | AdapterError) -> None:
            if isinstance(outcome, AdapterError):
                logger.error(f"Run {k} of {config.id} failed: {outcome}")
                failed.append(FailedRun(k, str(outcome)))
                if store:
                    store.save_failure(cid, config.id, k, str(outcome), outcome.stderr)
                if len(failed) > abort_after:
                    raise CampaignAborted(
                        f"{len(failed)} of {config.n} runs of {config.id} failed; campaign aborted",
                        failed=len(failed),
                    )
                return
            metadata = {
                "campaign_id": cid,
                "config_id": config.id,
                "util_target": format_float(config.load.cpu_percent),
                "util_observed": format_float(round(monitor.sample_since_last().cpu_percent_observed, 1)),
                "priority": config.priority,
                "pinning": format_core_list(config.pinning or ()),
                "started_at": started_at,
                "finished_at": _now(),
                "controls_skipped": ",".join(outcome.controls_skipped) or "none",
            }
            if parallel:
                metadata["utilization_invalid"] = "true"
            trace = outcome.trace.with_metadata(**metadata)
            if store:
                store.save_run(cid, config.id, k, trace)
            traces.append(trace)
            logger.debug(f"Run {k} of {config.id} finished")

        def collect(future) -> RunOutcome | AdapterError:
            try:
                return adapter.result(future)
            except AdapterError as e:
                return e

        monitor.sample_since_last()
        if parallel:
            started_at = _now()
            pending = [(request.run_index, adapter.submit(request)) for request in requests()]
            for k, future in pending:
                record(k, started_at, collect(future))
        else:
            for request in requests():
                started_at = _now()
                record(request.run_index, started_at, collect(adapter.submit(request)))
    finally:
        adapter.stop()
        if handle is not None:
            controller.stop(handle)
        snapshot.restore()

    logger.info(f"Finished {config.id}: {len(traces)} traces, {len(failed)} failed")
    return RunSet.from_traces(
        traces, config_id=config.id, scenario_id=scenario.scenario_id, failed=failed
    )


def check_one_factor(configs: Sequence[CampaignConfig], factor: str) -> None:
    """
    Raises:
        ValueError: the configurations differ in something other than ``factor``.
    """
    if factor not in FACTOR_FIELDS:
        raise ValueError(f"unknown sweep factor {factor!r}; expected one of {sorted(FACTOR_FIELDS)}")
    exclude = FACTOR_FIELDS[factor]
    dumps = [c.model_dump(exclude=exclude) for c in configs]
    for config, dump in zip(configs[1:], dumps[1:]):
        if dump != dumps[0]:
            changed = sorted(k for k in dump if dump[k] != dumps[0].get(k))
            raise ValueError(f"config {config.id} differs from {configs[0].id} in {changed}, not only {factor}")


def _baseline_config(base: CampaignConfig, scenario: str) -> CampaignConfig:
    """Zero-load, default-priority copy of ``base`` on the baseline scenario, id ``baseline-<scenario_id>``."""
    config = base.replace(
        scenario=scenario,
        scenario_spec=None,
        load=LoadTarget(),
        priority=0,
        pinning=None,
        stop_on_collision=False,
    )
    return config.replace(config_id=f"{BASELINE_PREFIX}-{config.scenario_id}")


def _register_baseline(manifest: CampaignManifest, config: CampaignConfig) -> None:
    if manifest.baseline_config_id is not None:
        raise ValueError(f"campaign {manifest.campaign_id} already has baseline {manifest.baseline_config_id}")
    manifest.add(config)
    manifest.baseline_config_id = config.id


def _run_baseline(
    adapter: BaseSimulatorAdapter,
    config: CampaignConfig,
    manifest: CampaignManifest,
    store: CampaignStore | None,
    **kwargs,
) -> float:
    rs = run_repeats(adapter, config, store=store, campaign_id=manifest.campaign_id, **kwargs)
    floor = noise_floor(rs)
    logger.info(f"Noise floor from {config.scenario_id} baseline: {floor} m")
    return floor


def _sweep(
    adapter: BaseSimulatorAdapter,
    base: CampaignConfig,
    factor: str,
    levels: Sequence[float],
    make_config: Callable[[float], CampaignConfig],
    *,
    store: CampaignStore | None,
    campaign_id: str | None,
    load_controller: LoadController | None,
    baseline: str | None,
    parallel: bool,
    monitor: UtilizationMonitor | None,
) -> SweepResult:
    if not levels:
        raise ValueError("a sweep needs at least one level")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"sweep levels must be strictly ascending, got {list(levels)}")

    monitor = monitor or UtilizationMonitor()
    idle = monitor.sample().cpu_percent_observed
    if idle > get_settings().idle_warning_percent:
        logger.warning(
            f"System utilization is already {idle:.1f}% before the sweep; "
            "results may not reflect the requested levels"
        )

    configs = [make_config(level) for level in levels]
    check_one_factor(configs, factor)

    manifest = _new_manifest(store, campaign_id, "sweep", adapter, factor=factor, parallel=parallel)
    baseline_config = _baseline_config(base, baseline) if baseline else None
    if baseline_config:
        _register_baseline(manifest, baseline_config)
    for config, level in zip(configs, levels):
        manifest.add(config, level)
    if store:
        store.write_manifest(manifest)

    common = dict(load_controller=load_controller, parallel=parallel, monitor=monitor)
    floor = _run_baseline(adapter, baseline_config, manifest, store, **common) if baseline_config else None

    entries: list[SweepEntry] = []
    for config, level in zip(configs, levels):
        rs = run_repeats(adapter, config, store=store, campaign_id=manifest.campaign_id, **common)
        result = audit_run_set(rs, config.tolerance, noise_floor=floor, config_id=config.id)
        logger.info(f"{factor}={format_float(level)}: max deviation {result.max_deviation} m, {result.verdict.value}")
        entries.append(SweepEntry(config.id, float(level), result))

    sweep = SweepResult(factor=factor, entries=tuple(entries), noise_floor=floor, campaign_id=manifest.campaign_id)
    boundary = sweep.domain_boundary
    if boundary is None:
        logger.warning(f"No permissible {factor} level: the first level already exceeds tolerance")
    else:
        logger.info(f"Operational domain boundary: {factor} <= {format_float(boundary)}")
    return sweep


def sweep_utilization(
    adapter: BaseSimulatorAdapter,
    base: CampaignConfig,
    levels: Sequence[float],
    *,
    store: CampaignStore | None = None,
    campaign_id: str | None = None,
    load_controller: LoadController | None = None,
    baseline: str | None = None,
    parallel: bool = False,
    monitor: UtilizationMonitor | None = None,
) -> SweepResult:
    """
    One run_repeats per CPU utilization level, everything else held constant.

    Args:
        levels: utilization percentages, strictly ascending.
        baseline: scenario id of a zero-load, collision-free set run first;
            its maximum deviation becomes the noise floor of every result.
    """
    return _sweep(
        adapter,
        base,
        "utilization",
        levels,
        lambda level: base.replace(
            load=base.load.model_copy(update={"cpu_percent": level}),
            config_id=None,
        ),
        store=store,
        campaign_id=campaign_id,
        load_controller=load_controller,
        baseline=baseline,
        parallel=parallel,
        monitor=monitor,
    )


def sweep_priority(
    adapter: BaseSimulatorAdapter,
    base: CampaignConfig,
    priorities: Sequence[int],
    *,
    store: CampaignStore | None = None,
    campaign_id: str | None = None,
    load_controller: LoadController | None = None,
    baseline: str | None = None,
    parallel: bool = False,
    monitor: UtilizationMonitor | None = None,
) -> SweepResult:
    """As sweep_utilization, with the scheduling priority as the single factor."""
    return _sweep(
        adapter,
        base,
        "priority",
        [int(p) for p in priorities],
        lambda priority: base.replace(priority=int(priority), config_id=None),
        store=store,
        campaign_id=campaign_id,
        load_controller=load_controller,
        baseline=baseline,
        parallel=parallel,
        monitor=monitor,
    )


def escalation_stages(max_n: int) -> list[int]:
    """10, 100, 1000, ... below max_n, then max_n itself."""
    if max_n < 10:
        raise ValueError(f"max_n must be at least 10, got {max_n}")
    stages = []
    n = 10
    while n < max_n:
        stages.append(n)
        n *= 10
    stages.append(max_n)
    return stages


def escalate_sample_size(
    adapter: BaseSimulatorAdapter,
    config: CampaignConfig,
    tolerance: float | None = None,
    max_n: int = 1000,
    *,
    store: CampaignStore | None = None,
    campaign_id: str | None = None,
    load_controller: LoadController | None = None,
    parallel: bool = False,
    monitor: UtilizationMonitor | None = None,
) -> tuple[int, AuditResult]:
    """
    Grows the sample by orders of magnitude, reusing earlier runs.

    A non-permissible stage ends the escalation; a permissible verdict is
    only returned after max_n runs.

    Returns:
        tuple[int, AuditResult]: the number of runs requested at the final
        stage and the audit over all runs so far.
    """
    stages = escalation_stages(max_n)
    tol = config.tolerance if tolerance is None else tolerance
    config = config.replace(n=max_n, tolerance=tol, config_id=config.id)

    manifest = _new_manifest(store, campaign_id, "escalate", adapter, parallel=parallel)
    manifest.add(config)
    if store:
        store.write_manifest(manifest)

    traces: list[RunTrace] = []
    failed: list[FailedRun] = []
    done = 0
    result: AuditResult | None = None
    for stage in stages:
        rs = run_repeats(
            adapter,
            config.replace(n=stage, config_id=config.id),
            store=store,
            campaign_id=manifest.campaign_id,
            load_controller=load_controller,
            start_index=done,
            parallel=parallel,
            monitor=monitor,
        )
        traces.extend(rs.runs)
        failed.extend(rs.failed)
        done = stage
        combined = RunSet.from_traces(traces, config_id=config.id, scenario_id=rs.scenario_id, failed=failed)
        result = audit_run_set(combined, tol, config_id=config.id)
        logger.info(f"Escalation stage n={stage}: max deviation {result.max_deviation} m, {result.verdict.value}")
        if not result.verdict.is_permissible:
            logger.warning(f"Tolerance exceeded at n={stage}; stopping escalation")
            return stage, result
    return done, result


def run_campaign(
    adapter: BaseSimulatorAdapter,
    config: CampaignConfig,
    *,
    store: CampaignStore | None = None,
    campaign_id: str | None = None,
    load_controller: LoadController | None = None,
    baseline: str | None = None,
    parallel: bool = False,
    monitor: UtilizationMonitor | None = None,
) -> tuple[str, AuditResult]:
    """Single-configuration campaign: optional baseline, run_repeats, audit."""
    manifest = _new_manifest(store, campaign_id, "run", adapter, parallel=parallel)
    baseline_config = _baseline_config(config, baseline) if baseline else None
    if baseline_config:
        _register_baseline(manifest, baseline_config)
    manifest.add(config, config.load.cpu_percent)
    if store:
        store.write_manifest(manifest)

    common = dict(load_controller=load_controller, parallel=parallel, monitor=monitor)
    floor = _run_baseline(adapter, baseline_config, manifest, store, **common) if baseline_config else None
    rs = run_repeats(adapter, config, store=store, campaign_id=manifest.campaign_id, **common)
    return manifest.campaign_id, audit_run_set(rs, config.tolerance, noise_floor=floor, config_id=config.id)


def row_label(scenario_id: str, config: CampaignConfig) -> str:
    """Table row name: the scenario, tagged with any non-default priority or pinning."""
    label = scenario_id
    if config.priority:
        label += f"@nice{config.priority}"
    if config.pinning:
        label += "@pin" + "+".join(str(c) for c in sorted(config.pinning))
    return label


@dataclass(frozen=True)
class CampaignAnalysis:
    campaign_id: str
    manifest: CampaignManifest
    audits: tuple[AuditResult, ...]
    noise_floor: float | None = None
    sweep: SweepResult | None = None

    def table_rows(self) -> list[tuple[str, float, AuditResult]]:
        """
        (row label, utilization level, result) triples for the domain table.

        Table columns are utilization levels, so configurations that differ in
        priority or pinning get their own row (``test2@nice-20``) instead of
        sharing a cell.
        """
        rows = []
        for result in self.audits:
            config = self.manifest.configs[result.config_id]
            rows.append((row_label(result.scenario_id, config), config.load.cpu_percent, result))
        return rows


def analyze_campaign(store: CampaignStore, campaign_id: str) -> CampaignAnalysis:
    """Recomputes every audit of a campaign from its stored traces; never runs a simulation."""
    manifest = store.load_manifest(campaign_id)
    floor = None
    if manifest.baseline_config_id:
        config = manifest.configs[manifest.baseline_config_id]
        baseline = store.load_run_set(campaign_id, config.id, scenario_id=config.scenario_id)
        floor = noise_floor(baseline)

    audits: list[AuditResult] = []
    entries: list[SweepEntry] = []
    for config_id in manifest.order:
        if config_id == manifest.baseline_config_id:
            continue
        config = manifest.configs[config_id]
        rs = store.load_run_set(campaign_id, config_id, scenario_id=config.scenario_id)
        result = audit_run_set(rs, config.tolerance, noise_floor=floor, config_id=config_id)
        audits.append(result)
        if manifest.factor and config_id in manifest.levels:
            entries.append(SweepEntry(config_id, manifest.levels[config_id], result))

    sweep = None
    if manifest.factor:
        sweep = SweepResult(
            factor=manifest.factor, entries=tuple(entries), noise_floor=floor, campaign_id=campaign_id
        )
    logger.info(f"Analyzed campaign {campaign_id}: {len(audits)} configurations")
    return CampaignAnalysis(campaign_id, manifest, tuple(audits), floor, sweep)


__all__ = [
    "run_repeats",
    "check_one_factor",
    "sweep_utilization",
    "sweep_priority",
    "escalation_stages",
    "escalate_sample_size",
    "run_campaign",
    "CampaignAnalysis",
    "row_label",
    "analyze_campaign",
]
