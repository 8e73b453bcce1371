"""Settings, logging setup, platform checks and shared formatting helpers."""
import logging

import pytest

from simvar.app.config import get_settings
from simvar.config import Config, setup_logging
from simvar.utils import format_core_list, format_float, format_sci, parse_core_list, parse_float_list


class TestSettings:
    def test_defaults(self):
        settings = get_settings()
        assert settings.tolerance_m == 0.01
        assert settings.levels == [0.0, 25.0, 50.0, 75.0, 95.0]
        assert settings.restricted_cap == 75.0
        assert settings.campaigns_dir.name == "campaigns"
        assert settings.campaigns_dir.is_absolute()

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("SIMVAR_TOLERANCE", "0.05")
        monkeypatch.setenv("SIMVAR_LEVELS", "0, 50")
        get_settings.cache_clear()
        settings = get_settings()
        assert settings.tolerance_m == 0.05
        assert settings.levels == [0.0, 50.0]

    def test_invalid_tolerance(self, monkeypatch):
        from pydantic import ValidationError

        monkeypatch.setenv("SIMVAR_TOLERANCE", "0")
        get_settings.cache_clear()
        with pytest.raises(ValidationError):
            get_settings()


@pytest.mark.usefixtures("restore_root_logging")
def test_setup_logging_accepts_names():
    setup_logging("warning")
    assert logging.getLogger().level == logging.WARNING
    setup_logging(logging.INFO)
    assert logging.getLogger().level == logging.INFO


def test_platform_check_returns_problems():
    problems = Config.validate()
    assert isinstance(problems, list)
    assert all(isinstance(p, str) for p in problems)


class TestFormatting:
    @pytest.mark.parametrize(
        "value, text",
        [(0.0, "0"), (-0.0, "-0"), (0.1, "0.1"), (0.1 + 0.2, "0.30000000000000004"), (75.0, "75"), (1e-13, "1e-13")],
    )
    def test_format_float(self, value, text):
        assert format_float(value) == text

    @pytest.mark.parametrize("value, text", [(0.59, "5.9e-01"), (5.6e-13, "5.6e-13"), (0.0, "0"), (None, "-")])
    def test_format_sci(self, value, text):
        assert format_sci(value) == text

    def test_core_lists(self):
        assert parse_core_list("0,2-3") == [0, 2, 3]
        assert format_core_list([3, 0, 2]) == "0,2,3"
        assert format_core_list(None) == "none"
        with pytest.raises(ValueError, match="inverted"):
            parse_core_list("3-1")
        with pytest.raises(ValueError, match="empty"):
            parse_core_list(" , ")

    def test_float_lists(self):
        assert parse_float_list("0, 25,,50") == [0.0, 25.0, 50.0]
        with pytest.raises(ValueError, match="not a number"):
            parse_float_list("0,high")
