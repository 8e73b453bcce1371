"""
Command-line front end.

    simvar run       --scenario test4 --n 100 --load 75 --inject collision_impulse_jitter=0.01
    simvar sweep     --scenario test2 --factor utilization --levels 0,25,50,75,95
    simvar escalate  --scenario test1 --max-n 1000
    simvar analyze   --campaign <id>
    simvar report    --campaign <id>[,<id>...] --gate
    simvar selftest

Exit codes: 0 ok, 1 usage or validation error, 2 tolerance gate failed,
3 adapter, load generator or campaign store failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from simvar import __version__
from simvar.app.config import get_settings
from simvar.app.errors import (
    AdapterError,
    CampaignAborted,
    LoadControlError,
    SimvarError,
    StoreError,
)
from simvar.app.loadgen.controller import LoadTarget
from simvar.app.minisim.catalog import CATALOG
from simvar.app.minisim.scenario import resolve_scenario
from simvar.app.orchestrate.adapters import SimulatorAdapterRegistry
from simvar.app.orchestrate.campaign import (
    CampaignAnalysis,
    analyze_campaign,
    escalate_sample_size,
    run_campaign,
    sweep_priority,
    sweep_utilization,
)
from simvar.app.orchestrate.models import CampaignConfig, SeedPolicy
from simvar.app.orchestrate.store import CampaignStore
from simvar.app.report.csv_writer import emit_series_csv, emit_sweep_csv
from simvar.app.report.tables import RestrictionPolicy, build_table, table_frame
from simvar.app.report.text import EXIT_GATE_FAILED, EXIT_OK, gate_exit_code, render_audit, render_sweep, render_text
from simvar.app.selftest import run_selftest
from simvar.config import Config, setup_logging
from simvar.utils import parse_core_list, parse_float_list, parse_int_list

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_ENVIRONMENT = 3
DEFAULT_PRIORITIES = "-20,0,19"
SEED_POLICIES = {"fixed": SeedPolicy.FIXED, "per-run": SeedPolicy.PER_RUN}


class SimvarArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2, which means a failed gate here."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _injector(text: str) -> tuple[str, Any]:
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    return name.strip(), yaml.safe_load(value) if value.strip() else None


def _core_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(parse_core_list(text))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _add_campaign_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", default="test1", help=f"catalog id ({', '.join(CATALOG)}) or scenario file")
    parser.add_argument("--n", type=int, default=100, help="repeats per configuration (default: 100)")
    parser.add_argument("--seed", type=int, default=0, help="simulation seed, unsigned 64-bit")
    parser.add_argument("--seed-policy", choices=sorted(SEED_POLICIES), default="fixed")
    parser.add_argument("--load", type=float, default=0.0, help="target CPU utilization in percent")
    parser.add_argument("--priority", type=int, default=0, help="nice value, -20 (highest) to 19")
    parser.add_argument("--pin", type=_core_list, default=None, help="cores to pin the simulator to, e.g. 0,2-3")
    parser.add_argument("--tolerance", type=float, default=None, help="permissible deviation in metres")
    parser.add_argument("--stop-on-collision", action="store_true")
    parser.add_argument(
        "--inject",
        type=_injector,
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="injector override, repeatable (e.g. collision_impulse_jitter=0.01)",
    )
    parser.add_argument("--adapter", default=None, help="external command template with {out_trace}; default embedded")
    parser.add_argument("--baseline", default=None, help="collision-free scenario run first at 0%% load as noise floor")
    parser.add_argument("--campaign", default=None, help="campaign id (default: generated)")
    parser.add_argument("--out", type=Path, default=None, help="directory for reports (default: campaign analysis/)")
    parser.add_argument("--parallel", action="store_true", help="overlap runs; marks utilization results invalid")


def build_parser() -> argparse.ArgumentParser:
    parser = SimvarArgumentParser(prog="simvar", description="Determinism audits of repeated simulation runs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{run,sweep,escalate,analyze,report,selftest}")

    run = sub.add_parser("run", help="repeat one configuration and audit it")
    _add_campaign_flags(run)
    run.add_argument("--gate", action="store_true", help="exit 2 when the audit is non-permissible")

    sweep = sub.add_parser("sweep", help="vary utilization or priority, one factor at a time")
    _add_campaign_flags(sweep)
    sweep.add_argument("--factor", choices=("utilization", "priority"), default="utilization")
    sweep.add_argument("--levels", default=None, help="comma-separated levels (percent, or nice values)")

    escalate = sub.add_parser("escalate", help="grow n by orders of magnitude until max-n or a violation")
    _add_campaign_flags(escalate)
    escalate.add_argument("--max-n", type=int, default=1000)

    analyze = sub.add_parser("analyze", help="recompute audits from stored traces")
    analyze.add_argument("--campaign", required=True)
    analyze.add_argument("--out", type=Path, default=None)
    analyze.add_argument("--gate", action="store_true")

    report = sub.add_parser("report", help="restricted/unrestricted domain table")
    report.add_argument("--campaign", required=True, action="append", help="campaign id(s), repeatable or comma-separated")
    report.add_argument("--cap", type=float, default=None, help="utilization cap for the restricted column")
    report.add_argument("--include-post-collision", action="store_true", help="keep post-collision data in restricted")
    report.add_argument("--tolerance", type=float, default=None)
    report.add_argument("--xlsx", type=Path, default=None, help="also write the table as a styled spreadsheet")
    report.add_argument("--out", type=Path, default=None)
    report.add_argument("--gate", action="store_true")

    selftest = sub.add_parser("selftest", help="acceptance checks on the embedded simulator")
    selftest.add_argument("--n", type=int, default=20)
    selftest.add_argument("--check", action="append", default=None, help="run only the named check(s)")
    return parser


def config_from_args(args: argparse.Namespace) -> CampaignConfig:
    """Builds and validates the campaign configuration before anything runs."""
    settings = get_settings()
    data: dict[str, Any] = {
        "scenario": args.scenario,
        "injectors": dict(args.inject),
        "n": args.n,
        "seed": args.seed,
        "seed_policy": SEED_POLICIES[args.seed_policy],
        "load": LoadTarget(cpu_percent=args.load),
        "priority": args.priority,
        "pinning": args.pin,
        "tolerance": args.tolerance if args.tolerance is not None else settings.tolerance_m,
        "stop_on_collision": args.stop_on_collision,
    }
    if args.scenario not in CATALOG:
        spec = resolve_scenario(args.scenario)
        data.update(scenario=spec.scenario_id, scenario_spec=spec)
    config = CampaignConfig.model_validate(data)
    config.scenario_model()
    return config


def _out_dir(store: CampaignStore, campaign_id: str, out: Path | None) -> Path:
    if out is None:
        return store.analysis_dir(campaign_id)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _cmd_run(args: argparse.Namespace, store: CampaignStore) -> int:
    config = config_from_args(args)
    with SimulatorAdapterRegistry().resolve(args.adapter) as adapter:
        campaign_id, result = run_campaign(
            adapter, config, store=store, campaign_id=args.campaign, baseline=args.baseline, parallel=args.parallel
        )
    text = render_audit(result, campaign_id)
    out = _out_dir(store, campaign_id, args.out)
    _write_text(out / f"summary_{result.config_id}.txt", text)
    emit_series_csv(result, out)
    sys.stdout.write(text)
    return gate_exit_code(result) if args.gate else EXIT_OK


def _cmd_sweep(args: argparse.Namespace, store: CampaignStore) -> int:
    base = config_from_args(args)
    if args.factor == "utilization":
        levels = parse_float_list(args.levels) if args.levels else get_settings().levels
        run_sweep = sweep_utilization
    else:
        levels = parse_int_list(args.levels or DEFAULT_PRIORITIES)
        run_sweep = sweep_priority
    with SimulatorAdapterRegistry().resolve(args.adapter) as adapter:
        sweep = run_sweep(
            adapter, base, levels, store=store, campaign_id=args.campaign, baseline=args.baseline, parallel=args.parallel
        )
    out = _out_dir(store, sweep.campaign_id, args.out)
    emit_sweep_csv(sweep, out / "sweep.csv")
    for entry in sweep.entries:
        emit_series_csv(entry.result, out)
    text = render_sweep(sweep)
    _write_text(out / "sweep.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_escalate(args: argparse.Namespace, store: CampaignStore) -> int:
    config = config_from_args(args)
    with SimulatorAdapterRegistry().resolve(args.adapter) as adapter:
        n_final, result = escalate_sample_size(
            adapter, config, config.tolerance, args.max_n, store=store, campaign_id=args.campaign, parallel=args.parallel
        )
    text = f"n_final={n_final}\n" + render_audit(result)
    sys.stdout.write(text)
    return EXIT_OK


def _write_analysis(analysis: CampaignAnalysis, out: Path) -> str:
    chunks = []
    for result in analysis.audits:
        text = render_audit(result, analysis.campaign_id)
        _write_text(out / f"summary_{result.config_id}.txt", text)
        emit_series_csv(result, out)
        chunks.append(text)
    if analysis.sweep is not None and analysis.sweep.entries:
        emit_sweep_csv(analysis.sweep, out / "sweep.csv")
        sweep_text = render_sweep(analysis.sweep)
        _write_text(out / "sweep.txt", sweep_text)
        chunks.append(sweep_text)
    return "\n".join(chunks)


def _cmd_analyze(args: argparse.Namespace, store: CampaignStore) -> int:
    analysis = analyze_campaign(store, args.campaign)
    sys.stdout.write(_write_analysis(analysis, _out_dir(store, args.campaign, args.out)))
    if args.gate and any(not r.verdict.is_permissible for r in analysis.audits):
        return EXIT_GATE_FAILED
    return EXIT_OK


def _cmd_report(args: argparse.Namespace, store: CampaignStore) -> int:
    campaign_ids = [cid.strip() for value in args.campaign for cid in value.split(",") if cid.strip()]
    rows = []
    for campaign_id in campaign_ids:
        rows.extend(analyze_campaign(store, campaign_id).table_rows())
    policy = RestrictionPolicy(
        utilization_cap=args.cap if args.cap is not None else get_settings().restricted_cap,
        pre_collision_only=not args.include_post_collision,
    )
    report = build_table(rows, policy, tolerance=args.tolerance, campaign_ids=campaign_ids)
    text = render_text(report)
    out = _out_dir(store, campaign_ids[0], args.out)
    _write_text(out / "report.txt", text)
    if args.xlsx:
        from simvar.app.utils.excel import write_styled_excel

        write_styled_excel(table_frame(report, numeric=True), args.xlsx, tolerance=report.tolerance)
        logger.info(f"Wrote {args.xlsx}")
    sys.stdout.write(text)
    return gate_exit_code(report) if args.gate else EXIT_OK


def _cmd_selftest(args: argparse.Namespace, store: CampaignStore) -> int:
    results = run_selftest(args.n, args.check)
    for result in results:
        sys.stdout.write(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}\n")
    if not results:
        sys.stdout.write("no checks selected\n")
        return EXIT_USAGE
    return EXIT_OK if all(r.passed for r in results) else EXIT_GATE_FAILED


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "escalate": _cmd_escalate,
    "analyze": _cmd_analyze,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
}


def dispatch(args: argparse.Namespace, store: CampaignStore | None = None) -> int:
    """Runs one parsed invocation and maps failures to exit codes."""
    try:
        return COMMANDS[args.command](args, store or CampaignStore())
    except (AdapterError, LoadControlError, CampaignAborted, StoreError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        stderr = getattr(e, "stderr", "")
        if stderr:
            logger.error(f"simulator stderr:\n{stderr}")
        return EXIT_ENVIRONMENT
    except (SimvarError, ValidationError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    Config.validate()
    if getattr(args, "parallel", False):
        logger.warning("--parallel: runs overlap, utilization_invalid=true is recorded in every trace")
    return dispatch(args)


__all__ = ["build_parser", "config_from_args", "dispatch", "main"]
