"""Shared fixtures: isolated settings, a campaign store and in-process doubles."""
import logging

import pytest

from simvar.app.config import get_settings
from simvar.app.orchestrate.store import CampaignStore
from simvar.tests.doubles import IdleMonitor, InlineAdapter, RecordingLoadController


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Every test gets its own campaigns directory and no load settling delay."""
    monkeypatch.setenv("SIMVAR_CAMPAIGNS_DIR", str(tmp_path / "campaigns"))
    monkeypatch.setenv("SIMVAR_LOAD_SETTLE", "0")
    for name in ("SIMVAR_TOLERANCE", "SIMVAR_LEVELS", "SIMVAR_RESTRICTED_CAP", "SIMVAR_ABORT_FRACTION"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def store(tmp_path):
    return CampaignStore(tmp_path / "store")


@pytest.fixture
def load_controller():
    return RecordingLoadController()


@pytest.fixture
def monitor():
    return IdleMonitor()


@pytest.fixture
def adapter():
    with InlineAdapter() as inline:
        yield inline


@pytest.fixture
def restore_root_logging():
    """setup_logging replaces the root handlers; put pytest's back afterwards."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
