"""Human-readable reports: key=value header followed by a plain-text table."""
from __future__ import annotations

from simvar import __version__
from simvar.app.config import get_settings
from simvar.app.metrics.audit import AuditResult
from simvar.app.minisim.scenario import ScenarioSpec
from simvar.app.orchestrate.models import SweepResult
from simvar.app.report.tables import DomainReport, table_frame
from simvar.utils import format_float, format_sci

EXIT_OK = 0
EXIT_GATE_FAILED = 2


def default_lines() -> list[str]:
    """Toolkit defaults; printed in every report so results stay auditable."""
    settings = get_settings()
    fields = ScenarioSpec.model_fields
    return [
        f"default.dt_physics_s={format_float(fields['dt_physics'].default)}",
        f"default.log_interval_s={format_float(fields['log_interval'].default)}",
        f"default.tolerance_m={format_float(settings.tolerance_m)}",
        f"default.levels_pct={','.join(format_float(level) for level in settings.levels)}",
        f"default.restricted_cap_pct={format_float(settings.restricted_cap)}",
    ]


def render_audit(result: AuditResult, campaign_id: str | None = None) -> str:
    lines = ["#simvar-audit v1", f"toolkit_version={__version__}"]
    if campaign_id:
        lines.append(f"campaign_id={campaign_id}")
    lines.extend(default_lines())
    lines.extend(result.summary_lines())
    return "\n".join(lines) + "\n"


def render_sweep(sweep: SweepResult) -> str:
    boundary = sweep.domain_boundary
    lines = [
        "#simvar-sweep v1",
        f"toolkit_version={__version__}",
        f"campaign_id={sweep.campaign_id or 'none'}",
        *default_lines(),
        f"factor={sweep.factor}",
        f"noise_floor_m={'absent' if sweep.noise_floor is None else format_float(sweep.noise_floor)}",
        f"domain_boundary={'none' if boundary is None else format_float(boundary)}",
        "statistic=maximum",
        "",
        f"{'level':>8}  {'n':>6}  {'max_dev_m':>10}  verdict",
    ]
    for entry in sweep.entries:
        lines.append(
            f"{format_float(entry.level):>8}  {entry.result.n:>6}  "
            f"{format_sci(entry.result.max_deviation):>10}  {entry.result.verdict.value}"
        )
    return "\n".join(lines) + "\n"


def render_text(report: DomainReport) -> str:
    """
    Renders the domain report. Contains no timestamps, so re-rendering the
    same stored campaign yields identical text.
    """
    p = report.provenance
    lines = [
        "#simvar-report v1",
        f"toolkit_version={p.toolkit_version}",
        f"campaigns={','.join(p.campaign_ids) or 'none'}",
        *default_lines(),
        f"tolerance_m={format_float(report.tolerance)}",
        f"policy.utilization_cap_pct={format_float(report.policy.utilization_cap)}",
        f"policy.pre_collision_only={'true' if report.policy.pre_collision_only else 'false'}",
        f"noise_floor_m={'absent' if report.noise_floor is None else format_float(report.noise_floor)}",
    ]
    lines.extend(f"decision.{key}={value}" for key, value in p.decisions.items())
    lines.append("")
    lines.append(table_frame(report).to_string(index=False))
    lines.append("")
    for row in report.rows:
        if row.restricted_gaps:
            levels = ",".join(format_float(level) for level in row.restricted_gaps)
            lines.append(f"restricted_gap.{row.scenario_id}={levels}")
    verdict = "permissible" if report.all_restricted_permissible else "non_permissible"
    lines.append(f"domain_verdict_restricted={verdict}")
    return "\n".join(lines) + "\n"


def gate_exit_code(report: DomainReport | AuditResult) -> int:
    """0 when every gated row (or the single audit) is permissible, 2 otherwise."""
    if isinstance(report, AuditResult):
        return EXIT_OK if report.verdict.is_permissible else EXIT_GATE_FAILED
    return EXIT_OK if report.all_restricted_permissible else EXIT_GATE_FAILED


__all__ = [
    "EXIT_OK",
    "EXIT_GATE_FAILED",
    "default_lines",
    "render_audit",
    "render_sweep",
    "render_text",
    "gate_exit_code",
]
