"""
Acceptance checks on the embedded simulator, runnable on any machine
(``simvar selftest``). Load-accuracy checks are not part of it: they depend
on the host being idle.
"""
from __future__ import annotations

import logging
import math
import tempfile
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from simvar.app.loadgen.controller import LoadController, LoadTarget
from simvar.app.metrics.audit import audit_run_set
from simvar.app.metrics.variance import Verdict, deviation_series, gate, max_variance, variance_at
from simvar.app.minisim.catalog import CATALOG
from simvar.app.minisim.engine import simulate
from simvar.app.minisim.injectors import EnvironmentContext
from simvar.app.minisim.navmesh import Navmesh, plan_path
from simvar.app.minisim.scenario import FrontierMode, MapBounds, NavmeshSpec, ScenarioSpec
from simvar.app.orchestrate.adapters import EmbeddedAdapter
from simvar.app.orchestrate.campaign import analyze_campaign, escalate_sample_size, run_campaign
from simvar.app.orchestrate.models import CampaignConfig
from simvar.app.orchestrate.store import CampaignStore
from simvar.app.report.csv_writer import emit_series_csv
from simvar.app.report.tables import build_table
from simvar.app.report.text import render_text
from simvar.app.trace.codec import fingerprint
from simvar.app.trace.model import Position, RunSet, RunTrace, TraceSample

logger = logging.getLogger(__name__)

TOLERANCE = 0.01
ENTROPY_SEED = 20240101
COLLISION_JITTER = 0.01
RARE_FAULT_PROBABILITY = 0.003
RARE_FAULT_SEEDS = (11, 12, 13)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def repeat(spec: ScenarioSpec, n: int, seed: int = 0, environment: EnvironmentContext | None = None) -> RunSet:
    """n in-process runs of one scenario."""
    traces = [simulate(spec, seed, run_index=k, environment=environment) for k in range(n)]
    return RunSet.from_traces(traces, config_id=spec.scenario_id)


def _jittered(scenario_id: str, jitter: float = COLLISION_JITTER) -> ScenarioSpec:
    return CATALOG[scenario_id]().with_injectors(collision_impulse_jitter=jitter, entropy_seed=ENTROPY_SEED)


def check_bit_determinism(n: int) -> tuple[bool, str]:
    """Every catalog scenario, injectors off, idle and under real CPU load."""
    details = []
    ok = True
    controller = LoadController()
    for load in (0.0, 75.0):
        handle = controller.start(LoadTarget(cpu_percent=load))
        try:
            for scenario_id, build in CATALOG.items():
                rs = repeat(build(), n, environment=EnvironmentContext(util_target=load))
                distinct = len({fingerprint(run) for run in rs.runs})
                psi, _ = max_variance(rs)
                ok = ok and distinct == 1 and psi == 0.0
                details.append(f"{scenario_id}@{load:g}%:{distinct}fp,psi={psi:g}")
        finally:
            controller.stop(handle)
    return ok, " ".join(details)


def synthetic_run_set(rng: np.random.Generator, runs: int, actors: int, times: int) -> RunSet:
    ids = [f"a{i}" for i in range(actors)]
    traces = []
    for k in range(runs):
        samples = [
            TraceSample(round(tick * 0.1, 9), actor_id, Position(*rng.normal(0.0, 1.0, size=3).tolist()))
            for tick in range(times)
            for actor_id in ids
        ]
        traces.append(RunTrace(f"r{k}", "synthetic", 0, 0.1, 0.1, tuple(samples)))
    return RunSet.from_traces(traces)


def brute_force_psi(rs: RunSet) -> float:
    best = 0.0
    for actor_id in rs.actors:
        by_time: dict[float, list[tuple[float, float, float]]] = {}
        for run in rs.runs:
            for sample in run.samples_for(actor_id):
                by_time.setdefault(sample.t, []).append(sample.position.as_tuple())
        for points in by_time.values():
            if len(points) >= 2:
                best = max(best, float(np.var(np.array(points), axis=0).sum()))
    return best


def check_metrics_oracle(_: int) -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        rs = synthetic_run_set(
            rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)), int(rng.integers(1, 101))
        )
        psi, _ = max_variance(rs)
        expected = brute_force_psi(rs)
        worst = max(worst, abs(psi - expected) / max(expected, 1e-300))
    return worst <= 1e-12, f"worst relative error {worst:.3g} over 50 run sets"


def check_hand_value(_: int) -> tuple[bool, str]:
    v = variance_at([Position(0, 0, 0), Position(0, 0, 0), Position(0, 0.03, 0)])
    sigma = math.sqrt(v)
    ok = math.isclose(v, 2.0e-4, rel_tol=1e-12) and abs(sigma - 0.0141421356) <= 1e-9
    return ok, f"variance={v!r} deviation={sigma!r}"


def check_gate_fixture(_: int) -> tuple[bool, str]:
    verdicts = [gate(0.59, TOLERANCE), gate(5.6e-13, TOLERANCE), gate(0.01, TOLERANCE)]
    expected = [Verdict.NON_PERMISSIBLE, Verdict.PERMISSIBLE, Verdict.PERMISSIBLE]
    return verdicts == expected, " ".join(v.value for v in verdicts)


def check_pre_post_shape(n: int) -> tuple[bool, str]:
    ok = True
    details = []
    for scenario_id in ("test2", "test4"):
        rs = repeat(_jittered(scenario_id), n)
        result = audit_run_set(rs, TOLERANCE)
        first = min(t for run in rs.runs for t in run.collision_times())
        passed = (
            result.pre_collision_max_deviation == 0.0
            and (result.post_collision_max_deviation or 0.0) > TOLERANCE
            and result.t_split == first
        )
        ok = ok and passed
        details.append(
            f"{scenario_id}: t_split={result.t_split} pre={result.pre_collision_max_deviation} "
            f"post={result.post_collision_max_deviation}"
        )
    return ok, "; ".join(details)


def check_delayed_contamination(n: int) -> tuple[bool, str]:
    rs = repeat(_jittered("test4"), n)
    t_split = min(t for run in rs.runs for t in run.collision_times())
    series = deviation_series(rs, "v1")
    before = max((e.deviation for e in series.entries if e.t <= t_split), default=0.0)
    after = [e for e in series.entries if e.t > t_split and e.deviation > 0]
    ok = before == 0.0 and bool(after)
    onset = after[0].t if after else None
    return ok, f"v1 deviation 0 up to t_split={t_split}, first positive at t={onset}"


def check_injector_monotonicity(n: int) -> tuple[bool, str]:
    values = []
    for eps in (0.0, 1e-4, 1e-2):
        result = audit_run_set(repeat(_jittered("test2", eps), n), TOLERANCE)
        values.append(result.post_collision_max_deviation or 0.0)
    ok = all(a <= b for a, b in zip(values, values[1:]))
    return ok, "post max deviation " + " <= ".join(f"{v:.3g}" for v in values)


def symmetric_navmesh() -> Navmesh:
    """5 x 3 grid with the middle row blocked between the ends: two equal-cost routes."""
    return Navmesh(MapBounds(width=5, height=3), NavmeshSpec(blocked_cells=[(1, 1), (2, 1), (3, 1)]))


def check_astar_tiebreak(_: int) -> tuple[bool, str]:
    navmesh = symmetric_navmesh()
    start, goal = (0.5, 1.5), (4.5, 1.5)
    stable = {tuple(plan_path(navmesh, start, goal, FrontierMode.STABLE)) for _ in range(1000)}
    rng = np.random.default_rng(ENTROPY_SEED)
    shuffled = {tuple(plan_path(navmesh, start, goal, FrontierMode.RANDOM, rng)) for _ in range(1000)}
    return len(stable) == 1 and len(shuffled) >= 2, f"stable routes={len(stable)} random routes={len(shuffled)}"


def check_escalation_early_stop(_: int) -> tuple[bool, str]:
    config = CampaignConfig(
        scenario="test1",
        n=10,
        injectors={"glitch_probability": 1.0, "glitch_magnitude": 1.0, "entropy_seed": ENTROPY_SEED},
    )
    with EmbeddedAdapter() as adapter:
        n_final, result = escalate_sample_size(
            adapter, config, TOLERANCE, max_n=100, load_controller=LoadController(settle_s=0)
        )
    return n_final == 10 and not result.verdict.is_permissible, f"n_final={n_final} verdict={result.verdict.value}"


def rare_fault_config(entropy_seed: int) -> CampaignConfig:
    """
    test1 cut to 5 s, while both vehicles are still moving, with a 1 m glitch
    firing in about 3 runs out of 1000.
    """
    return CampaignConfig(
        scenario="test1",
        scenario_spec=CATALOG["test1"]().with_overrides(max_sim_time=5.0),
        n=10,
        injectors={
            "glitch_probability": RARE_FAULT_PROBABILITY,
            "glitch_magnitude": 1.0,
            "entropy_seed": entropy_seed,
        },
    )


def check_escalation_rare_fault(_: int) -> tuple[bool, str]:
    """A rare fault passes at n=10 and is caught once escalation reaches n=1000."""
    controller = LoadController(settle_s=0)
    details = []
    with EmbeddedAdapter() as adapter:
        for entropy_seed in RARE_FAULT_SEEDS:
            config = rare_fault_config(entropy_seed)
            _, small = escalate_sample_size(adapter, config, TOLERANCE, max_n=10, load_controller=controller)
            n_large, large = escalate_sample_size(adapter, config, TOLERANCE, max_n=1000, load_controller=controller)
            details.append(
                f"entropy_seed={entropy_seed}: n=10 {small.verdict.value}, n={n_large} {large.verdict.value}"
            )
            if small.verdict.is_permissible and not large.verdict.is_permissible:
                return True, "; ".join(details)
    return False, "; ".join(details)


def check_report_reproducible(n: int) -> tuple[bool, str]:
    with tempfile.TemporaryDirectory(prefix="simvar-selftest-") as tmp:
        store = CampaignStore(Path(tmp))
        config = CampaignConfig(
            scenario="test2",
            n=max(2, min(n, 10)),
            injectors={"collision_impulse_jitter": COLLISION_JITTER, "entropy_seed": ENTROPY_SEED},
        )
        with EmbeddedAdapter() as adapter:
            campaign_id, _ = run_campaign(adapter, config, store=store, load_controller=LoadController(settle_s=0))

        outputs = []
        for attempt in range(2):
            analysis = analyze_campaign(store, campaign_id)
            report = build_table(analysis.table_rows(), campaign_ids=[campaign_id])
            out_dir = Path(tmp) / f"out{attempt}"
            paths = emit_series_csv(analysis.audits[0], out_dir)
            outputs.append((render_text(report), [p.read_bytes() for p in paths]))
        identical = outputs[0] == outputs[1]
        bounded = all(
            row.max_restricted is not None
            and row.max_restricted <= row.max_unrestricted
            and row.max_restricted <= TOLERANCE
            for row in report.rows
        )
    return identical and bounded, f"identical={identical} restricted_within_tolerance={bounded}"


CHECKS: list[tuple[str, Callable[[int], tuple[bool, str]]]] = [
    ("bit_determinism", check_bit_determinism),
    ("metrics_oracle", check_metrics_oracle),
    ("hand_value", check_hand_value),
    ("gate_fixture", check_gate_fixture),
    ("pre_post_shape", check_pre_post_shape),
    ("delayed_contamination", check_delayed_contamination),
    ("injector_monotonicity", check_injector_monotonicity),
    ("astar_tiebreak", check_astar_tiebreak),
    ("escalation_early_stop", check_escalation_early_stop),
    ("escalation_rare_fault", check_escalation_rare_fault),
    ("report_reproducible", check_report_reproducible),
]


def run_selftest(n: int = 20, only: list[str] | None = None) -> list[CheckResult]:
    """Runs every check (or the named subset); a check that raises counts as failed."""
    if n < 2:
        raise ValueError(f"selftest needs n >= 2, got {n}")
    results = []
    for name, check in CHECKS:
        if only and name not in only:
            continue
        logger.info(f"Selftest check {name} (n={n})")
        try:
            passed, detail = check(n)
        except Exception as e:
            logger.exception(f"Selftest check {name} raised")
            passed, detail = False, f"{type(e).__name__}: {e}"
        if not passed:
            logger.error(f"Selftest check {name} failed: {detail}")
        results.append(CheckResult(name, passed, detail))
    return results


__all__ = [
    "CheckResult",
    "CHECKS",
    "RARE_FAULT_SEEDS",
    "rare_fault_config",
    "run_selftest",
    "repeat",
    "symmetric_navmesh",
    "synthetic_run_set",
]
