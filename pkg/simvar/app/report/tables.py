"""
Restricted/unrestricted domain table over scenarios and utilization levels.

Unrestricted values are the maximum deviation over all levels and the full
time range. Restricted values keep only levels at or below the utilization
cap and, when a run set contains a collision, only its pre-collision part.
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import pandas as pd

from simvar import __version__
from simvar.app.config import get_settings
from simvar.app.metrics.audit import DECISIONS, AuditResult
from simvar.app.metrics.variance import Verdict, gate
from simvar.utils import format_float, format_sci

logger = logging.getLogger(__name__)

GAP = "gap"


def _default_cap() -> float:
    return get_settings().restricted_cap


@dataclass(frozen=True)
class RestrictionPolicy:
    utilization_cap: float = field(default_factory=_default_cap)
    pre_collision_only: bool = True


@dataclass(frozen=True)
class LevelCell:
    level: float
    unrestricted: float | None
    restricted: float | None
    # within the cap, but the results collide before any comparable sample
    restricted_gap: bool = False

    @property
    def is_gap(self) -> bool:
        return self.unrestricted is None


@dataclass(frozen=True)
class ScenarioRow:
    scenario_id: str
    actors: tuple[str, ...]
    collisions: tuple[tuple[str, str], ...]
    n: int
    cells: tuple[LevelCell, ...]
    max_unrestricted: float | None
    max_restricted: float | None
    verdict_unrestricted: Verdict | None
    verdict_restricted: Verdict | None

    @property
    def gaps(self) -> list[float]:
        return [cell.level for cell in self.cells if cell.is_gap]

    @property
    def restricted_gaps(self) -> list[float]:
        return [cell.level for cell in self.cells if cell.restricted_gap]

    @property
    def collision_label(self) -> str:
        if not self.collisions:
            return "none"
        return ";".join(f"{a}-{b}" for a, b in self.collisions)


@dataclass(frozen=True)
class Provenance:
    campaign_ids: tuple[str, ...]
    toolkit_version: str = __version__
    decisions: dict[str, str] = field(default_factory=lambda: dict(DECISIONS))


@dataclass(frozen=True)
class DomainReport:
    rows: tuple[ScenarioRow, ...]
    levels: tuple[float, ...]
    policy: RestrictionPolicy
    tolerance: float
    noise_floor: float | None
    provenance: Provenance

    @property
    def all_restricted_permissible(self) -> bool:
        """True when every row with a restricted value is within tolerance."""
        return all(
            row.verdict_restricted is not Verdict.NON_PERMISSIBLE for row in self.rows
        )


def _max(values: Iterable[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return max(present) if present else None


def _restricted(result: AuditResult, level: float, policy: RestrictionPolicy) -> float | None:
    if level > policy.utilization_cap:
        return None
    return result.restricted_max_deviation if policy.pre_collision_only else result.max_deviation


def _cell(level: float, results: Sequence[AuditResult], policy: RestrictionPolicy) -> LevelCell:
    """Merges every result for one (scenario, level) column by column, keeping each maximum."""
    restricted = [_restricted(result, level, policy) for result in results]
    return LevelCell(
        level=level,
        unrestricted=max(result.max_deviation for result in results),
        restricted=_max(restricted),
        restricted_gap=level <= policy.utilization_cap and all(v is None for v in restricted),
    )


def build_table(
    results: Sequence[tuple[str, float, AuditResult]],
    policy: RestrictionPolicy | None = None,
    tolerance: float | None = None,
    campaign_ids: Sequence[str] = (),
) -> DomainReport:
    """
    Assembles the domain table.

    Args:
        results: (scenario_id, utilization level, AuditResult) triples.
        policy: utilization cap and pre-collision flag for the restricted column.
        tolerance: gate in metres; defaults to the tightest tolerance among results.
        campaign_ids: campaigns the results were computed from.

    Returns:
        DomainReport: one row per scenario; missing (scenario, level)
        combinations appear as gap cells, never dropped.
    """
    policy = policy or RestrictionPolicy()
    if not results:
        raise ValueError("cannot build a domain table from no results")

    by_key: dict[tuple[str, float], list[AuditResult]] = {}
    n_by_scenario: dict[str, int] = {}
    for scenario_id, level, result in results:
        key = (scenario_id, float(level))
        if key in by_key:
            logger.warning(f"Several results for {scenario_id} at {format_float(level)}%; keeping the maximum")
        by_key.setdefault(key, []).append(result)
        n_by_scenario[scenario_id] = min(n_by_scenario.get(scenario_id, result.n), result.n)

    tolerances = {result.tolerance for _, _, result in results}
    if tolerance is None:
        tolerance = min(tolerances)
        if len(tolerances) > 1:
            logger.warning(f"Results use different tolerances {sorted(tolerances)}; gating at {tolerance}")

    levels = tuple(sorted({level for _, level in by_key}))
    scenarios = sorted({scenario_id for scenario_id, _ in by_key})

    rows: list[ScenarioRow] = []
    for scenario_id in scenarios:
        cells: list[LevelCell] = []
        actors: set[str] = set()
        collisions: set[tuple[str, str]] = set()
        for level in levels:
            merged = by_key.get((scenario_id, level))
            if merged is None:
                logger.warning(f"No result for {scenario_id} at {format_float(level)}%; marked as gap")
                cells.append(LevelCell(level, None, None))
                continue
            for result in merged:
                actors.update(result.actors)
                collisions.update(result.collisions)
            cell = _cell(level, merged, policy)
            if cell.restricted_gap:
                logger.warning(
                    f"{scenario_id} at {format_float(level)}% collides before any comparable sample; "
                    "restricted value marked as gap"
                )
            cells.append(cell)

        max_unrestricted = _max(c.unrestricted for c in cells)
        max_restricted = _max(c.restricted for c in cells)
        rows.append(
            ScenarioRow(
                scenario_id=scenario_id,
                actors=tuple(sorted(actors)),
                collisions=tuple(sorted(collisions)),
                n=n_by_scenario[scenario_id],
                cells=tuple(cells),
                max_unrestricted=max_unrestricted,
                max_restricted=max_restricted,
                verdict_unrestricted=None if max_unrestricted is None else gate(max_unrestricted, tolerance),
                verdict_restricted=None if max_restricted is None else gate(max_restricted, tolerance),
            )
        )

    return DomainReport(
        rows=tuple(rows),
        levels=levels,
        policy=policy,
        tolerance=tolerance,
        noise_floor=_max(result.noise_floor for merged in by_key.values() for result in merged),
        provenance=Provenance(campaign_ids=tuple(campaign_ids)),
    )


def table_frame(report: DomainReport, numeric: bool = False) -> pd.DataFrame:
    """
    The domain table as a DataFrame.

    With ``numeric`` the deviations stay floats (for spreadsheets);
    otherwise they are rendered in two-figure scientific notation.
    """

    def value(v: float | None, gap: bool = False) -> object:
        if gap:
            return GAP
        if numeric:
            return v
        return format_sci(v)

    def verdict(v: Verdict | None) -> str:
        return "-" if v is None else v.value

    records = []
    for row in report.rows:
        record: dict[str, object] = {
            "scenario": row.scenario_id,
            "actors": len(row.actors),
            "collisions": row.collision_label,
            "n": row.n,
        }
        for cell in row.cells:
            record[f"max_dev@{format_float(cell.level)}%"] = value(cell.unrestricted, cell.is_gap)
        record["unrestricted_m"] = value(row.max_unrestricted)
        record["restricted_m"] = value(row.max_restricted, row.max_restricted is None and bool(row.restricted_gaps))
        record["verdict_unrestricted"] = verdict(row.verdict_unrestricted)
        record["verdict_restricted"] = verdict(row.verdict_restricted)
        records.append(record)
    return pd.DataFrame.from_records(records)


__all__ = [
    "GAP",
    "RestrictionPolicy",
    "LevelCell",
    "ScenarioRow",
    "Provenance",
    "DomainReport",
    "build_table",
    "table_frame",
]
