"""Cross-run alignment of one actor's samples by exact sample time."""
from __future__ import annotations

from simvar.app.errors import AlignmentError
from simvar.app.trace.model import AlignedSeries, Position, RunSet


def align(rs: RunSet, actor_id: str) -> AlignedSeries:
    """
    Groups the actor's positions by identical sample time across the runs.

    A run stops contributing after the sample carrying its ``destroyed``
    event. Times seen in fewer than two runs are kept with their count.

    Raises:
        AlignmentError: fewer than two runs, or the actor is in none of them.
    """
    if rs.n < 2:
        raise AlignmentError(f"alignment needs at least 2 runs, run set {rs.config_id} has {rs.n}")
    grouped: dict[float, list[Position]] = {}
    seen = False
    for run in rs.runs:
        for sample in run.samples:
            if sample.actor_id != actor_id:
                continue
            seen = True
            grouped.setdefault(sample.t, []).append(sample.position)
            if sample.event.is_destroyed:
                break
    if not seen:
        raise AlignmentError(f"actor {actor_id!r} is absent from every run of {rs.scenario_id}")
    times = tuple(sorted(grouped))
    return AlignedSeries(
        actor_id=actor_id,
        n=rs.n,
        times=times,
        positions_by_time=tuple(tuple(grouped[t]) for t in times),
        presence_count=tuple(len(grouped[t]) for t in times),
    )
