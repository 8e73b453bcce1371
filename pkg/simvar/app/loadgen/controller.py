"""
Controlled CPU load.

Worker processes busy-spin for ``duty * 100 ms`` and sleep for the rest of
each 100 ms window. A trim thread compares observed system utilization with
the target once per second and nudges the shared duty fraction. GPU load is
delegated to an external command.
"""
from __future__ import annotations

import logging
import multiprocessing as mp
import os
import shlex
import subprocess
import threading
import time
from datetime import datetime, timezone

from pydantic import BaseModel, ConfigDict, Field

from simvar.app.config import get_settings
from simvar.app.errors import LoadControlError
from simvar.app.loadgen.monitor import CpuCounter

logger = logging.getLogger(__name__)

DUTY_WINDOW_S = 0.1
TRIM_PERIOD_S = 1.0
TRIM_GAIN = 0.5
GPU_STARTUP_CHECK_S = 0.5
STOP_GRACE_S = 1.0


class LoadTarget(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    cpu_percent: float = Field(default=0.0, ge=0, le=100)
    gpu_command: str | None = None
    workers: int | None = Field(default=None, ge=1)

    @property
    def resolved_workers(self) -> int:
        return self.workers or os.cpu_count() or 1

    @property
    def resolved_gpu_command(self) -> str | None:
        """SIMVAR_GPU_LOAD_CMD wins over the configured command."""
        return get_settings().gpu_load_cmd or self.gpu_command


def _spin_worker(duty, stop) -> None:
    while not stop.is_set():
        window_start = time.perf_counter()
        busy_until = window_start + DUTY_WINDOW_S * duty.value
        while time.perf_counter() < busy_until:
            pass
        remaining = DUTY_WINDOW_S - (time.perf_counter() - window_start)
        if remaining > 0:
            stop.wait(remaining)


class LoadHandle:
    """One active load: worker processes, trim thread and optional GPU command."""

    def __init__(self, target: LoadTarget) -> None:
        self.target = target
        self.started_at: datetime | None = None
        self.active = False
        self.workers: list[mp.Process] = []
        self.gpu_process: subprocess.Popen | None = None
        ctx = mp.get_context()
        self._duty = ctx.Value("d", target.cpu_percent / 100.0)
        self._stop = ctx.Event()
        self._trim_stop = threading.Event()
        self._trim_thread: threading.Thread | None = None
        self._ctx = ctx

    @property
    def duty(self) -> float:
        return self._duty.value

    @property
    def pids(self) -> list[int]:
        pids = [p.pid for p in self.workers if p.pid is not None]
        if self.gpu_process is not None:
            pids.append(self.gpu_process.pid)
        return pids

    def start(self) -> None:
        try:
            if self.target.cpu_percent > 0:
                for index in range(self.target.resolved_workers):
                    worker = self._ctx.Process(
                        target=_spin_worker,
                        args=(self._duty, self._stop),
                        name=f"simvar-load-{index}",
                        daemon=True,
                    )
                    worker.start()
                    self.workers.append(worker)
                self._trim_thread = threading.Thread(target=self._trim, name="simvar-load-trim", daemon=True)
                self._trim_thread.start()
            command = self.target.resolved_gpu_command
            if command:
                self._start_gpu(command)
        except (OSError, LoadControlError) as e:
            self.stop()
            if isinstance(e, LoadControlError):
                raise
            raise LoadControlError(f"could not spawn load workers: {e}") from e
        self.active = True
        self.started_at = datetime.now(timezone.utc)
        logger.info(
            f"Load started: target {self.target.cpu_percent}% on {len(self.workers)} workers"
            + (f", gpu command pid {self.gpu_process.pid}" if self.gpu_process else "")
        )

    def _start_gpu(self, command: str) -> None:
        try:
            process = subprocess.Popen(
                shlex.split(command), stdout=subprocess.DEVNULL, stderr=subprocess.PIPE, text=True
            )
        except OSError as e:
            raise LoadControlError(f"GPU load command failed to start: {e}") from e
        try:
            code = process.wait(timeout=GPU_STARTUP_CHECK_S)
        except subprocess.TimeoutExpired:
            self.gpu_process = process
            return
        stderr = process.stderr.read() if process.stderr else ""
        if code != 0:
            raise LoadControlError(f"GPU load command exited with {code}: {stderr.strip()}")
        logger.warning("GPU load command exited immediately with status 0; no GPU load is applied")

    def _trim(self) -> None:
        counter = CpuCounter()
        target = self.target.cpu_percent
        while not self._trim_stop.wait(TRIM_PERIOD_S):
            observed = counter.read()
            duty = self._duty.value + TRIM_GAIN * (target - observed) / 100.0
            self._duty.value = min(max(duty, 0.0), 1.0)
            logger.debug(f"Load trim: observed {observed:.1f}% target {target}% duty {self._duty.value:.3f}")

    def stop(self) -> None:
        self._trim_stop.set()
        self._stop.set()
        for worker in self.workers:
            worker.join(timeout=STOP_GRACE_S)
            if worker.is_alive():
                worker.terminate()
                worker.join(timeout=STOP_GRACE_S)
            if worker.is_alive():
                worker.kill()
                worker.join()
        if self._trim_thread is not None:
            self._trim_thread.join(timeout=TRIM_PERIOD_S * 2)
        if self.gpu_process is not None and self.gpu_process.poll() is None:
            self.gpu_process.terminate()
            try:
                self.gpu_process.wait(timeout=STOP_GRACE_S)
            except subprocess.TimeoutExpired:
                self.gpu_process.kill()
                self.gpu_process.wait()
        self.active = False


class LoadController:
    """Owns at most one active LoadHandle."""

    def __init__(self, settle_s: float | None = None) -> None:
        self.settle_s = get_settings().load_settle_s if settle_s is None else settle_s
        self._handle: LoadHandle | None = None

    @property
    def active(self) -> bool:
        return self._handle is not None and self._handle.active

    @property
    def handle(self) -> LoadHandle | None:
        return self._handle

    def start(self, target: LoadTarget, settle: bool = True) -> LoadHandle:
        if self.active:
            raise LoadControlError("a load is already active for this controller; stop it first")
        handle = LoadHandle(target)
        handle.start()
        self._handle = handle
        if settle and handle.workers and self.settle_s > 0:
            logger.info(f"Waiting {self.settle_s}s for utilization to settle")
            time.sleep(self.settle_s)
        return handle

    def stop(self, handle: LoadHandle | None = None) -> None:
        handle = handle or self._handle
        if handle is None or not handle.active:
            logger.warning("stop_load called on a load that is not active; nothing to do")
            return
        handle.stop()
        logger.info("Load stopped")


_default_controller: LoadController | None = None


def default_controller() -> LoadController:
    global _default_controller
    if _default_controller is None:
        _default_controller = LoadController()
    return _default_controller


def start_load(target: LoadTarget) -> LoadHandle:
    return default_controller().start(target)


def stop_load(handle: LoadHandle | None = None) -> None:
    default_controller().stop(handle)


__all__ = ["LoadTarget", "LoadHandle", "LoadController", "start_load", "stop_load"]
