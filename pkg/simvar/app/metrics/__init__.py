"""Cross-run variance, maximum deviation and collision segmentation."""
from simvar.app.metrics.audit import (
    AuditResult,
    PrePostSplit,
    SegmentSlice,
    audit_run_set,
    noise_floor,
    segment_pre_post,
)
from simvar.app.metrics.variance import (
    DeviationEntry,
    DeviationSeries,
    Tolerance,
    Verdict,
    deviation_series,
    gate,
    max_variance,
    variance_at,
)

__all__ = [
    "AuditResult",
    "PrePostSplit",
    "SegmentSlice",
    "audit_run_set",
    "noise_floor",
    "segment_pre_post",
    "DeviationEntry",
    "DeviationSeries",
    "Tolerance",
    "Verdict",
    "deviation_series",
    "gate",
    "max_variance",
    "variance_at",
]
