"""
Simulator adapters: the embedded simulator or an external command.

An external command template must contain ``{out_trace}`` and may use
``{scenario_file}`` and ``{seed}``; it must exit 0 after writing a trace
file at ``{out_trace}``.
"""
from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
from abc import ABC, abstractmethod
from concurrent.futures import Executor, Future, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from simvar.app.config import get_settings
from simvar.app.errors import AdapterError, TraceFormatError
from simvar.app.minisim.engine import simulate
from simvar.app.minisim.injectors import EnvironmentContext
from simvar.app.minisim.scenario import ScenarioSpec, write_scenario_file
from simvar.app.orchestrate.controls import ProcessControls
from simvar.app.trace.codec import parse_trace, read_trace_file, write_trace
from simvar.app.trace.model import RunTrace

logger = logging.getLogger(__name__)

EMBEDDED = "embedded"


class AdapterKind(str, Enum):
    EMBEDDED = "embedded"
    EXTERNAL = "external"


@dataclass(frozen=True)
class RunRequest:
    scenario: ScenarioSpec
    seed: int
    run_index: int
    run_id: str
    environment: EnvironmentContext = field(default_factory=EnvironmentContext)


@dataclass(frozen=True)
class RunOutcome:
    trace: RunTrace
    controls_skipped: tuple[str, ...] = ()
    stderr: str = ""


class BaseSimulatorAdapter(ABC):
    """Interface for simulator backends."""

    kind: AdapterKind

    def __init__(self, timeout_s: float | None = None) -> None:
        self.timeout_s = get_settings().adapter_timeout_s if timeout_s is None else timeout_s
        self._executor: Executor | None = None
        self.controls = ProcessControls()

    @classmethod
    @abstractmethod
    def supports(cls, template: str | None) -> bool:
        """Returns True if this adapter handles the given --adapter value."""

    @abstractmethod
    def _make_executor(self, workers: int) -> Executor:
        """Executor whose workers run the simulations."""

    @abstractmethod
    def _task(self, request: RunRequest):
        """(callable, args) executed on the executor for one run."""

    def describe(self) -> str:
        return self.kind.value

    def start(self, controls: ProcessControls, workers: int = 1) -> None:
        self.stop()
        self.controls = controls
        self._executor = self._make_executor(workers)

    def stop(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True, cancel_futures=True)
            self._executor = None

    def submit(self, request: RunRequest) -> Future:
        if self._executor is None:
            self.start(self.controls)
        fn, args = self._task(request)
        return self._executor.submit(fn, *args)

    def result(self, future: Future) -> RunOutcome:
        """Waits for a submitted run; raises AdapterError on any failure."""
        try:
            outcome = future.result(timeout=self.timeout_s)
        except AdapterError:
            raise
        except TimeoutError as e:
            raise AdapterError(f"run timed out after {self.timeout_s}s") from e
        except Exception as e:
            raise AdapterError(f"{type(e).__name__}: {e}") from e
        if isinstance(outcome, tuple):
            data, skipped = outcome
            return RunOutcome(parse_trace(data), tuple(skipped))
        return outcome

    def run(self, request: RunRequest) -> RunOutcome:
        return self.result(self.submit(request))

    def __enter__(self) -> "BaseSimulatorAdapter":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


_worker_skipped: list[str] = []


def _init_embedded_worker(controls: ProcessControls) -> None:
    global _worker_skipped
    _worker_skipped = controls.apply()


def _simulate_in_worker(request: RunRequest) -> tuple[bytes, list[str]]:
    trace = simulate(
        request.scenario,
        request.seed,
        run_index=request.run_index,
        environment=request.environment,
        run_id=request.run_id,
    )
    return write_trace(trace), list(_worker_skipped)


class EmbeddedAdapter(BaseSimulatorAdapter):
    """Runs the embedded simulator in a worker process carrying the priority and pinning."""

    kind = AdapterKind.EMBEDDED

    @classmethod
    def supports(cls, template: str | None) -> bool:
        return template is None or template.strip() in ("", EMBEDDED)

    def _make_executor(self, workers: int) -> Executor:
        return ProcessPoolExecutor(
            max_workers=workers, initializer=_init_embedded_worker, initargs=(self.controls,)
        )

    def _task(self, request: RunRequest):
        return _simulate_in_worker, (request,)


class ExternalAdapter(BaseSimulatorAdapter):
    """Runs a user-supplied simulator command per run."""

    kind = AdapterKind.EXTERNAL

    def __init__(self, template: str, timeout_s: float | None = None) -> None:
        super().__init__(timeout_s)
        if "{out_trace}" not in template:
            raise AdapterError("external adapter template must contain {out_trace}")
        try:
            self.argv_template = shlex.split(template)
        except ValueError as e:
            raise AdapterError(f"cannot parse adapter template: {e}") from e
        self.template = template

    @classmethod
    def supports(cls, template: str | None) -> bool:
        return template is not None and "{out_trace}" in template

    def describe(self) -> str:
        return self.template

    def _make_executor(self, workers: int) -> Executor:
        return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="simvar-external")

    def _task(self, request: RunRequest):
        return self._run_command, (request,)

    def command_for(self, request: RunRequest, scenario_file: Path, out_trace: Path) -> list[str]:
        values = {"scenario_file": str(scenario_file), "seed": str(request.seed), "out_trace": str(out_trace)}
        try:
            return [arg.format(**values) for arg in self.argv_template]
        except (KeyError, IndexError) as e:
            raise AdapterError(f"unknown placeholder in adapter template: {e}") from e

    def _run_command(self, request: RunRequest) -> RunOutcome:
        with tempfile.TemporaryDirectory(prefix="simvar-run-") as tmp:
            scenario_file = write_scenario_file(request.scenario, Path(tmp) / "scenario.yaml")
            out_trace = Path(tmp) / "out.trace"
            argv = self.command_for(request, scenario_file, out_trace)
            logger.debug(f"Running external simulator: {shlex.join(argv)}")
            try:
                process = subprocess.Popen(argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
            except OSError as e:
                raise AdapterError(f"could not start simulator: {e}") from e
            skipped = self.controls.apply(process.pid) if process.poll() is None else []
            try:
                _, stderr = process.communicate(timeout=self.timeout_s)
            except subprocess.TimeoutExpired:
                process.kill()
                _, stderr = process.communicate()
                raise AdapterError(f"simulator timed out after {self.timeout_s}s", stderr=stderr)
            if process.returncode != 0:
                raise AdapterError(f"simulator exited with status {process.returncode}", stderr=stderr)
            if not out_trace.is_file():
                raise AdapterError("simulator exited 0 but wrote no trace", stderr=stderr)
            try:
                trace = read_trace_file(out_trace)
            except TraceFormatError as e:
                raise AdapterError(f"simulator wrote an invalid trace: {e}", stderr=stderr) from e
        return RunOutcome(trace, tuple(skipped), stderr)


class SimulatorAdapterRegistry:
    def __init__(self) -> None:
        self.adapters: list[type[BaseSimulatorAdapter]] = [EmbeddedAdapter, ExternalAdapter]

    def resolve(self, template: str | None = None, timeout_s: float | None = None) -> BaseSimulatorAdapter:
        for adapter in self.adapters:
            if adapter.supports(template):
                if adapter is EmbeddedAdapter:
                    return EmbeddedAdapter(timeout_s)
                return adapter(template, timeout_s)
        raise AdapterError(f"no adapter supports {template!r}; external templates need {{out_trace}}")


__all__ = [
    "AdapterKind",
    "RunRequest",
    "RunOutcome",
    "BaseSimulatorAdapter",
    "EmbeddedAdapter",
    "ExternalAdapter",
    "SimulatorAdapterRegistry",
]
