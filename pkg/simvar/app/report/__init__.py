"""Domain tables, deviation CSVs and text reports."""
from simvar.app.report.csv_writer import emit_series_csv, emit_sweep_csv, series_frame
from simvar.app.report.tables import (
    GAP,
    DomainReport,
    Provenance,
    RestrictionPolicy,
    ScenarioRow,
    build_table,
    table_frame,
)
from simvar.app.report.text import gate_exit_code, render_audit, render_sweep, render_text

__all__ = [
    "emit_series_csv",
    "emit_sweep_csv",
    "series_frame",
    "GAP",
    "DomainReport",
    "Provenance",
    "RestrictionPolicy",
    "ScenarioRow",
    "build_table",
    "table_frame",
    "gate_exit_code",
    "render_audit",
    "render_sweep",
    "render_text",
]
