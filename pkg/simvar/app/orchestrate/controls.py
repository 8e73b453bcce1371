"""
Scheduling priority and core pinning for simulator processes.

Controls are applied where the platform allows it and skipped with a
warning where it does not; every skipped control is reported back so it
can be recorded in the run metadata.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import psutil

logger = logging.getLogger(__name__)

# nice value -> Windows priority class, checked from the most favourable end
_WINDOWS_CLASSES = (
    (-11, "HIGH_PRIORITY_CLASS"),
    (-1, "ABOVE_NORMAL_PRIORITY_CLASS"),
    (0, "NORMAL_PRIORITY_CLASS"),
    (10, "BELOW_NORMAL_PRIORITY_CLASS"),
    (19, "IDLE_PRIORITY_CLASS"),
)


def _windows_class(priority: int) -> int | None:
    for upper, name in _WINDOWS_CLASSES:
        if priority <= upper:
            return getattr(psutil, name, None)
    return None


@dataclass(frozen=True)
class ProcessControls:
    priority: int = 0
    pinning: tuple[int, ...] | None = None

    def apply(self, pid: int | None = None) -> list[str]:
        """
        Applies priority and pinning to ``pid`` (default: this process).

        Returns:
            list[str]: names of the controls that could not be applied.
        """
        skipped: list[str] = []
        try:
            process = psutil.Process(pid)
        except psutil.NoSuchProcess:
            logger.warning(f"Process {pid} exited before controls could be applied")
            return ["priority", "pinning"]

        if not self._apply_priority(process):
            skipped.append("priority")
        if self.pinning:
            if not self._apply_pinning(process):
                skipped.append("pinning")
        return skipped

    def _apply_priority(self, process: psutil.Process) -> bool:
        value: int | None = self.priority if os.name == "posix" else _windows_class(self.priority)
        if value is None:
            logger.warning(f"Priority {self.priority} has no equivalent on this platform; skipped")
            return False
        try:
            if process.nice() == value:
                return True
            process.nice(value)
            return True
        except psutil.AccessDenied:
            logger.warning(
                f"Not permitted to set priority {self.priority} on pid {process.pid}; skipped "
                "(negative nice values usually need elevated privileges)"
            )
        except (psutil.NoSuchProcess, OSError, ValueError) as e:
            logger.warning(f"Could not set priority {self.priority} on pid {process.pid}: {e}")
        return False

    def _apply_pinning(self, process: psutil.Process) -> bool:
        if not hasattr(process, "cpu_affinity"):
            logger.warning("CPU affinity is not supported on this platform; pinning skipped")
            return False
        try:
            process.cpu_affinity(list(self.pinning))
            return True
        except psutil.AccessDenied:
            logger.warning(f"Not permitted to pin pid {process.pid} to cores {list(self.pinning)}; skipped")
        except (psutil.NoSuchProcess, OSError, ValueError) as e:
            logger.warning(f"Could not pin pid {process.pid} to cores {list(self.pinning)}: {e}")
        return False


@dataclass(frozen=True)
class ControlSnapshot:
    """Priority and affinity of a process, for restoring after a campaign."""

    pid: int
    nice: int | None
    affinity: tuple[int, ...] | None

    @classmethod
    def capture(cls, pid: int | None = None) -> "ControlSnapshot":
        process = psutil.Process(pid)
        try:
            nice = process.nice()
        except (psutil.AccessDenied, OSError):
            nice = None
        affinity = None
        if hasattr(process, "cpu_affinity"):
            try:
                affinity = tuple(process.cpu_affinity())
            except (psutil.AccessDenied, OSError):
                affinity = None
        return cls(process.pid, nice, affinity)

    def restore(self) -> None:
        current = ControlSnapshot.capture(self.pid)
        if current == self:
            return
        process = psutil.Process(self.pid)
        if self.nice is not None and current.nice != self.nice:
            try:
                process.nice(self.nice)
            except (psutil.AccessDenied, OSError) as e:
                logger.warning(f"Could not restore priority {self.nice}: {e}")
        if self.affinity is not None and current.affinity != self.affinity:
            try:
                process.cpu_affinity(list(self.affinity))
            except (psutil.AccessDenied, OSError) as e:
                logger.warning(f"Could not restore affinity {list(self.affinity)}: {e}")
        logger.info(f"Restored scheduling controls of pid {self.pid}")


__all__ = ["ProcessControls", "ControlSnapshot"]
