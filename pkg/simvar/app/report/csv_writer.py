"""Plot-ready CSV outputs: deviation over time and maximum deviation per sweep level."""
from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from simvar.app.metrics.audit import AuditResult
from simvar.app.orchestrate.models import SweepResult
from simvar.utils import format_float

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ["t", "actor_id", "deviation_m", "presence_count", "noise_floor_m"]
SWEEP_COLUMNS = [
    "level",
    "config_id",
    "scenario_id",
    "max_deviation_m",
    "verdict",
    "tolerance_m",
    "noise_floor_m",
]


def _number(value: float | None) -> str:
    # Full precision, and "0" rather than "0.0" for exact zeros
    return "" if value is None else format_float(value)


def _write(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.debug(f"Wrote {len(df)} rows to {path}")
    return path


def series_frame(result: AuditResult, actor_id: str | None = None) -> pd.DataFrame:
    records = []
    for series in result.per_actor:
        if actor_id is not None and series.actor_id != actor_id:
            continue
        for entry in series.entries:
            records.append(
                {
                    "t": _number(entry.t),
                    "actor_id": series.actor_id,
                    "deviation_m": _number(entry.deviation),
                    "presence_count": entry.presence_count,
                    "noise_floor_m": _number(result.noise_floor),
                }
            )
    return pd.DataFrame.from_records(records, columns=SERIES_COLUMNS)


def emit_series_csv(result: AuditResult, out_dir: Path, prefix: str | None = None) -> list[Path]:
    """
    Writes ``<prefix>_<actor>.csv`` per actor and ``<prefix>_all.csv``.

    Returns:
        list[Path]: the per-actor files in actor order, then the combined file.
    """
    prefix = prefix or f"series_{result.config_id}"
    out_dir = Path(out_dir)
    paths = [
        _write(series_frame(result, series.actor_id), out_dir / f"{prefix}_{series.actor_id}.csv")
        for series in result.per_actor
    ]
    paths.append(_write(series_frame(result), out_dir / f"{prefix}_all.csv"))
    logger.info(f"Wrote deviation series for {len(result.per_actor)} actors to {out_dir}")
    return paths


def emit_sweep_csv(sweep: SweepResult, path: Path) -> Path:
    """
    One row per sweep level with its maximum deviation and verdict.

    Raises:
        ValueError: the sweep has no entries.
    """
    if not sweep.entries:
        raise ValueError("cannot write an empty sweep")
    records = [
        {
            "level": _number(entry.level),
            "config_id": entry.config_id,
            "scenario_id": entry.result.scenario_id,
            "max_deviation_m": _number(entry.result.max_deviation),
            "verdict": entry.result.verdict.value,
            "tolerance_m": _number(entry.result.tolerance),
            "noise_floor_m": _number(sweep.noise_floor),
        }
        for entry in sweep.entries
    ]
    return _write(pd.DataFrame.from_records(records, columns=SWEEP_COLUMNS), Path(path))


__all__ = ["SERIES_COLUMNS", "SWEEP_COLUMNS", "series_frame", "emit_series_csv", "emit_sweep_csv"]
