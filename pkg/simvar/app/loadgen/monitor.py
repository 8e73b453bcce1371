"""System-wide CPU utilization sampling."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

import psutil

from simvar.app.config import get_settings
from simvar.app.errors import LoadControlError

logger = logging.getLogger(__name__)

MIN_WINDOW_S = 0.5


class UtilizationSource(str, Enum):
    OS_COUNTERS = "os_counters"
    EXTERNAL = "external"


@dataclass(frozen=True)
class UtilizationSample:
    cpu_percent_observed: float
    source: UtilizationSource = UtilizationSource.OS_COUNTERS
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self) -> None:
        if not 0.0 <= self.cpu_percent_observed <= 100.0:
            raise ValueError(f"utilization must be within [0, 100], got {self.cpu_percent_observed}")

    @classmethod
    def external(cls, value: float) -> "UtilizationSample":
        """A figure supplied by the user when OS counters are unavailable."""
        return cls(float(value), UtilizationSource.EXTERNAL)


class CpuCounter:
    """
    Busy percentage between successive reads of the system CPU times.

    Each counter keeps its own snapshot, so independent readers (the load
    trim loop, per-run sampling) do not reset each other.
    """

    def __init__(self) -> None:
        self._last = self._times()

    @staticmethod
    def _times():
        try:
            return psutil.cpu_times()
        except Exception as e:
            raise LoadControlError(
                f"CPU utilization counters unavailable ({e}); supply the figure with source=external"
            ) from e

    @staticmethod
    def _totals(times) -> tuple[float, float]:
        total = sum(times)
        # guest time is already counted in user time on Linux
        total -= getattr(times, "guest", 0.0) + getattr(times, "guest_nice", 0.0)
        idle = times.idle + getattr(times, "iowait", 0.0)
        return total, idle

    def read(self) -> float:
        now = self._times()
        last, self._last = self._last, now
        total_now, idle_now = self._totals(now)
        total_last, idle_last = self._totals(last)
        elapsed = total_now - total_last
        if elapsed <= 0:
            return 0.0
        busy = 100.0 * (elapsed - (idle_now - idle_last)) / elapsed
        return min(max(busy, 0.0), 100.0)


class UtilizationMonitor:
    """
    ``sample()`` blocks for the sampling window; ``sample_since_last()``
    returns immediately with the busy fraction since the previous call.
    """

    def __init__(self, window_s: float | None = None) -> None:
        window = get_settings().utilization_window_s if window_s is None else window_s
        self.window_s = max(window, MIN_WINDOW_S)
        self._counter = CpuCounter()

    def sample(self) -> UtilizationSample:
        counter = CpuCounter()
        time.sleep(self.window_s)
        return UtilizationSample(counter.read())

    def sample_since_last(self) -> UtilizationSample:
        return UtilizationSample(self._counter.read())


_monitor: UtilizationMonitor | None = None


def sample_utilization() -> UtilizationSample:
    """Blocking system-wide sample over the configured window (at least 0.5 s)."""
    global _monitor
    if _monitor is None:
        _monitor = UtilizationMonitor()
    return _monitor.sample()


__all__ = ["UtilizationSource", "UtilizationSample", "CpuCounter", "UtilizationMonitor", "sample_utilization"]
