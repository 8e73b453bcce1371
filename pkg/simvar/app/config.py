"""Centralized settings loaded from the environment and .env."""
from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parents[2]
ENV_FILE = PROJECT_ROOT / ".env"


class Settings(BaseSettings):
    """Defaults every campaign, analysis and report falls back to."""

    campaigns_dir: Path = Field(default=Path("campaigns"), alias="SIMVAR_CAMPAIGNS_DIR")
    gpu_load_cmd: str | None = Field(default=None, alias="SIMVAR_GPU_LOAD_CMD")
    tolerance_m: float = Field(default=0.01, gt=0, alias="SIMVAR_TOLERANCE")
    utilization_levels: str = Field(default="0,25,50,75,95", alias="SIMVAR_LEVELS")
    restricted_cap: float = Field(default=75.0, ge=0, le=100, alias="SIMVAR_RESTRICTED_CAP")
    adapter_timeout_s: float = Field(default=300.0, gt=0, alias="SIMVAR_ADAPTER_TIMEOUT")
    failure_abort_fraction: float = Field(default=0.01, ge=0, le=1, alias="SIMVAR_ABORT_FRACTION")
    load_settle_s: float = Field(default=5.0, ge=0, alias="SIMVAR_LOAD_SETTLE")
    idle_warning_percent: float = Field(default=10.0, ge=0, le=100, alias="SIMVAR_IDLE_WARNING")
    utilization_window_s: float = Field(default=0.5, ge=0.5, alias="SIMVAR_UTIL_WINDOW")
    log_level: str = Field(default="INFO", alias="SIMVAR_LOG_LEVEL")

    model_config = SettingsConfigDict(
        env_file=ENV_FILE, env_file_encoding="utf-8", extra="ignore", populate_by_name=True
    )

    @field_validator("campaigns_dir", mode="after")
    @classmethod
    def resolve_campaigns_dir(cls, v: Path) -> Path:
        if v.is_absolute():
            return v
        # Relative to where the audit is launched, not to the package
        return (Path.cwd() / v).resolve()

    @property
    def levels(self) -> list[float]:
        """Utilization levels of the default sweep axis, in percent."""
        return [float(part) for part in self.utilization_levels.split(",") if part.strip()]


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Returns the single Settings instance shared by the whole toolkit."""
    return Settings()
