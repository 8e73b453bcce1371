"""
Audit of a run set: maximum variance, tolerance verdict, pre/post-collision
segmentation and the noise floor of a baseline.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

from simvar.app.errors import MetricsError
from simvar.app.metrics.variance import (
    DeviationSeries,
    Tolerance,
    Verdict,
    all_series,
    gate,
    max_variance,
    peak,
)
from simvar.app.trace.model import RunSet
from simvar.utils import format_float

logger = logging.getLogger(__name__)

DECISIONS = {
    "scalarization": "sum_of_axis_population_variances",
    "variance_divisor": "n",
    "split_rule": "earliest_collision_across_runs;pre=t<t_split;post=t>=t_split",
    "presence_policy": "times_with_presence_count>=2;destroyed_actors_stop_contributing",
    "boundary_rule": "max_deviation<=tolerance_is_permissible",
    "statistic": "maximum",
}


@dataclass(frozen=True)
class SegmentSlice:
    psi: float
    max_deviation: float
    argmax: tuple[str, float]


class PrePostSplit(NamedTuple):
    pre: SegmentSlice | None
    post: SegmentSlice | None
    t_split: float


@dataclass(frozen=True)
class AuditResult:
    scenario_id: str
    config_id: str
    n: int
    psi: float
    max_deviation: float
    argmax: tuple[str, float]
    per_actor: tuple[DeviationSeries, ...]
    tolerance: float
    verdict: Verdict
    pre_collision_max_deviation: float | None = None
    post_collision_max_deviation: float | None = None
    t_split: float | None = None
    noise_floor: float | None = None
    partial: bool = False
    actors: tuple[str, ...] = ()
    collisions: tuple[tuple[str, str], ...] = ()
    failed: int = 0

    @property
    def has_split(self) -> bool:
        return self.t_split is not None

    @property
    def restricted_max_deviation(self) -> float | None:
        """
        Max deviation with post-collision data removed. None when the run set
        collides before any pair of runs could be compared.
        """
        if self.has_split:
            return self.pre_collision_max_deviation
        return self.max_deviation

    def summary_lines(self) -> list[str]:
        def fmt(value: float | None) -> str:
            return "absent" if value is None else format_float(value)

        lines = [
            f"scenario_id={self.scenario_id}",
            f"config_id={self.config_id}",
            f"n={self.n}",
            f"failed_runs={self.failed}",
            f"tolerance_m={format_float(self.tolerance)}",
            f"psi_m2={format_float(self.psi)}",
            f"max_deviation_m={format_float(self.max_deviation)}",
            f"argmax_actor={self.argmax[0]}",
            f"argmax_t_s={format_float(self.argmax[1])}",
            f"t_split_s={fmt(self.t_split)}",
            f"pre_collision_max_deviation_m={fmt(self.pre_collision_max_deviation)}",
            f"post_collision_max_deviation_m={fmt(self.post_collision_max_deviation)}",
            f"restricted_max_deviation_m={fmt(self.restricted_max_deviation)}",
            f"noise_floor_m={fmt(self.noise_floor)}",
            f"partial_presence={'true' if self.partial else 'false'}",
            f"verdict={self.verdict.value}",
        ]
        lines.extend(f"decision.{key}={value}" for key, value in DECISIONS.items())
        return lines


def _slice(found: tuple[float, tuple[str, float]] | None) -> SegmentSlice | None:
    if found is None:
        return None
    psi, argmax = found
    return SegmentSlice(psi=psi, max_deviation=math.sqrt(psi), argmax=argmax)


def earliest_collision(rs: RunSet) -> float | None:
    times = [t for run in rs.runs for t in run.collision_times()]
    return min(times) if times else None


def _split(series: list[DeviationSeries], t_split: float) -> PrePostSplit:
    pre = _slice(peak(series, lambda t: t < t_split))
    post = _slice(peak(series, lambda t: t >= t_split))
    return PrePostSplit(pre=pre, post=post, t_split=t_split)


def segment_pre_post(rs: RunSet) -> PrePostSplit:
    """
    Splits the run set at the earliest collision time across all runs.

    Raises:
        MetricsError: no run contains a collision.
    """
    t_split = earliest_collision(rs)
    if t_split is None:
        raise MetricsError("no collision to segment")
    return _split(all_series(rs), t_split)


def noise_floor(baseline: RunSet) -> float:
    """
    Max deviation of a zero-load, collision-free baseline run set.

    Raises:
        MetricsError: fewer than 2 runs, or the baseline contains a collision.
    """
    if baseline.n < 2:
        raise MetricsError(f"baseline too small: n={baseline.n}, need at least 2")
    if earliest_collision(baseline) is not None:
        raise MetricsError(f"baseline {baseline.scenario_id} contains a collision")
    psi, _ = max_variance(baseline)
    return math.sqrt(psi)


def audit_run_set(
    rs: RunSet,
    tolerance: Tolerance | float,
    noise_floor: float | None = None,
    config_id: str | None = None,
) -> AuditResult:
    """Computes the full AuditResult of a run set."""
    tol = tolerance if isinstance(tolerance, Tolerance) else Tolerance(float(tolerance))
    series = all_series(rs)
    found = peak(series)
    if found is None:
        raise MetricsError(f"no usable (actor, t) pair in run set {rs.config_id}")
    psi, argmax = found
    max_deviation = math.sqrt(psi)

    pre = post = None
    t_split = earliest_collision(rs)
    if t_split is not None:
        split = _split(series, t_split)
        pre = split.pre.max_deviation if split.pre else None
        post = split.post.max_deviation if split.post else None

    collisions = sorted({pair for run in rs.runs for pair in run.collisions()})
    result = AuditResult(
        scenario_id=rs.scenario_id,
        config_id=config_id or rs.config_id,
        n=rs.n,
        psi=psi,
        max_deviation=max_deviation,
        argmax=argmax,
        per_actor=tuple(series),
        tolerance=tol.value,
        verdict=gate(max_deviation, tol),
        pre_collision_max_deviation=pre,
        post_collision_max_deviation=post,
        t_split=t_split,
        noise_floor=noise_floor,
        partial=any(s.partial for s in series),
        actors=tuple(rs.actors),
        collisions=tuple(collisions),
        failed=len(rs.failed),
    )
    logger.debug(
        f"Audit {result.scenario_id}/{result.config_id}: n={result.n} "
        f"max_deviation={result.max_deviation} verdict={result.verdict.value}"
    )
    return result


__all__ = [
    "DECISIONS",
    "SegmentSlice",
    "PrePostSplit",
    "AuditResult",
    "earliest_collision",
    "segment_pre_post",
    "noise_floor",
    "audit_run_set",
]
