"""
Configuration module for the toolkit.
Centralizes logging setup and the platform checks run before a campaign.
"""
import logging
import os
import sys
from pathlib import Path

import psutil

from simvar.app.config import get_settings

# Define project root
ROOT_DIR = Path(__file__).resolve().parent.parent


class Config:
    """Platform capabilities the orchestrator depends on."""

    SUPPORTS_AFFINITY = hasattr(psutil.Process, "cpu_affinity")
    SUPPORTS_NICE = os.name == "posix"

    @classmethod
    def validate(cls) -> list[str]:
        """Warn about controls that will be skipped on this platform."""
        problems: list[str] = []
        if not cls.SUPPORTS_AFFINITY:
            problems.append("CPU affinity is not supported on this platform; --pin will be skipped.")
        if not cls.SUPPORTS_NICE:
            problems.append("POSIX nice values are not available; --priority will be mapped or skipped.")
        try:
            psutil.cpu_percent(interval=None)
        except Exception as e:  # pragma: no cover - platform specific
            problems.append(f"System utilization counters unavailable: {e}")
        settings = get_settings()
        if settings.gpu_load_cmd:
            logging.info(f"GPU load command configured: {settings.gpu_load_cmd}")
        for problem in problems:
            logging.warning(problem)
        return problems


def setup_logging(level: int | str | None = None) -> None:
    """
    Configure logging for the toolkit.
    """
    if level is None:
        level = get_settings().log_level
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stdout),
        ],
        force=True,
    )
