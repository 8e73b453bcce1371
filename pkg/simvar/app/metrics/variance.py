"""
Cross-run positional variance.

The variance of an actor at time t is the population variance of its
positions across runs, summed over the three axes (the mean squared
Euclidean distance to the mean point).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from simvar.app.errors import MetricsError
from simvar.app.trace.align import align
from simvar.app.trace.model import Position, RunSet


def variance_at(positions: Sequence[Position]) -> float:
    """
    Population variance of a set of positions, summed over axes.

    Points are shifted by the first one and each axis runs an exactly
    rounded two-pass sum, so large common offsets do not cancel.

    Raises:
        MetricsError: fewer than 2 positions.
    """
    n = len(positions)
    if n < 2:
        raise MetricsError(f"variance needs at least 2 positions, got {n}")
    origin = positions[0]
    total: list[float] = []
    for axis in range(3):
        ref = origin.as_tuple()[axis]
        shifted = [p.as_tuple()[axis] - ref for p in positions]
        mean = math.fsum(shifted) / n
        total.append(math.fsum((d - mean) ** 2 for d in shifted) / n)
    return math.fsum(total)


@dataclass(frozen=True, slots=True)
class DeviationEntry:
    t: float
    variance: float
    deviation: float
    presence_count: int


@dataclass(frozen=True)
class DeviationSeries:
    actor_id: str
    entries: tuple[DeviationEntry, ...]
    partial: bool = False

    @property
    def max_deviation(self) -> float | None:
        return max((e.deviation for e in self.entries), default=None)


def deviation_series(rs: RunSet, actor_id: str) -> DeviationSeries:
    """Deviation of one actor at every time where at least two runs contribute."""
    aligned = align(rs, actor_id)
    entries: list[DeviationEntry] = []
    for index, t in enumerate(aligned.times):
        if not aligned.usable(index):
            continue
        variance = variance_at(aligned.positions_by_time[index])
        entries.append(DeviationEntry(t, variance, math.sqrt(variance), aligned.presence_count[index]))
    return DeviationSeries(actor_id=actor_id, entries=tuple(entries), partial=aligned.partial)


def all_series(rs: RunSet) -> list[DeviationSeries]:
    return [deviation_series(rs, actor_id) for actor_id in rs.actors]


def peak(
    series: Iterable[DeviationSeries], where: Callable[[float], bool] | None = None
) -> tuple[float, tuple[str, float]] | None:
    """
    Largest variance over (actor, t), ties going to the smaller t and then
    the lexicographically smaller actor_id. ``where`` filters sample times.
    """
    best: tuple[float, float, str] | None = None
    for s in series:
        for entry in s.entries:
            if where is not None and not where(entry.t):
                continue
            key = (-entry.variance, entry.t, s.actor_id)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    return -best[0], (best[2], best[1])


def max_variance(rs: RunSet) -> tuple[float, tuple[str, float]]:
    """
    Returns (psi, (actor_id, t)): the largest cross-run variance of any actor at any time.

    Raises:
        MetricsError: no actor has a usable (presence >= 2) sample time.
    """
    result = peak(all_series(rs))
    if result is None:
        raise MetricsError(f"no usable (actor, t) pair in run set {rs.config_id}")
    return result


@dataclass(frozen=True)
class Tolerance:
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value) or self.value <= 0:
            raise ValueError(f"tolerance must be positive, got {self.value}")


class Verdict(str, Enum):
    PERMISSIBLE = "permissible"
    NON_PERMISSIBLE = "non_permissible"

    @property
    def is_permissible(self) -> bool:
        return self is Verdict.PERMISSIBLE


def gate(result: object, tol: Tolerance | float) -> Verdict:
    """
    Permissible iff max deviation <= tolerance (equality passes).

    ``result`` is an AuditResult or a bare maximum deviation in metres.
    """
    tolerance = tol if isinstance(tol, Tolerance) else Tolerance(float(tol))
    value = result if isinstance(result, (int, float)) else result.max_deviation
    return Verdict.PERMISSIBLE if value <= tolerance.value else Verdict.NON_PERMISSIBLE


__all__ = [
    "variance_at",
    "DeviationEntry",
    "DeviationSeries",
    "deviation_series",
    "all_series",
    "peak",
    "max_variance",
    "Tolerance",
    "Verdict",
    "gate",
]
