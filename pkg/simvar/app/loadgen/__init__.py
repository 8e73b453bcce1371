"""Controlled CPU load and system utilization sampling."""
from simvar.app.loadgen.controller import LoadController, LoadHandle, LoadTarget, start_load, stop_load
from simvar.app.loadgen.monitor import (
    UtilizationMonitor,
    UtilizationSample,
    UtilizationSource,
    sample_utilization,
)

__all__ = [
    "LoadController",
    "LoadHandle",
    "LoadTarget",
    "start_load",
    "stop_load",
    "UtilizationMonitor",
    "UtilizationSample",
    "UtilizationSource",
    "sample_utilization",
]
