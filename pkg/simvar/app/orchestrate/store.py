"""
On-disk campaign layout.

    <campaigns_dir>/<campaign_id>/manifest.json
    <campaigns_dir>/<campaign_id>/runs/<config_id>/<k>.trace
    <campaigns_dir>/<campaign_id>/runs/<config_id>/<k>.failed
    <campaigns_dir>/<campaign_id>/analysis/
"""
from __future__ import annotations

import json
import logging
import re
import uuid
from datetime import datetime, timezone
from pathlib import Path

from pydantic import ValidationError

from simvar.app.config import get_settings
from simvar.app.errors import StoreError
from simvar.app.orchestrate.models import CampaignManifest
from simvar.app.trace.codec import TRACE_SUFFIX, read_trace_file, write_trace_file
from simvar.app.trace.model import FailedRun, RunSet, RunTrace

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
FAILED_SUFFIX = ".failed"
_CAMPAIGN_ID = re.compile(r"[A-Za-z0-9_.-]+")


class CampaignStore:
    """Maps campaign ids and run indices to files under the campaigns directory."""

    def __init__(self, root: Path | None = None) -> None:
        self.root = Path(root) if root else get_settings().campaigns_dir

    @staticmethod
    def new_campaign_id(prefix: str = "c") -> str:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        return f"{prefix}-{stamp}-{uuid.uuid4().hex[:6]}"

    def campaign_dir(self, campaign_id: str) -> Path:
        if not _CAMPAIGN_ID.fullmatch(campaign_id) or set(campaign_id) == {"."}:
            raise StoreError(f"invalid campaign id {campaign_id!r}")
        return self.root / campaign_id

    def runs_dir(self, campaign_id: str, config_id: str) -> Path:
        return self.campaign_dir(campaign_id) / "runs" / config_id

    def analysis_dir(self, campaign_id: str) -> Path:
        path = self.campaign_dir(campaign_id) / "analysis"
        path.mkdir(parents=True, exist_ok=True)
        return path

    def exists(self, campaign_id: str) -> bool:
        return (self.campaign_dir(campaign_id) / MANIFEST).is_file()

    def list_campaigns(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / MANIFEST).is_file())

    def write_manifest(self, manifest: CampaignManifest) -> Path:
        path = self.campaign_dir(manifest.campaign_id) / MANIFEST
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2)
        path.write_text(text + "\n", encoding="utf-8", newline="\n")
        return path

    def load_manifest(self, campaign_id: str) -> CampaignManifest:
        path = self.campaign_dir(campaign_id) / MANIFEST
        if not path.is_file():
            raise StoreError(f"campaign {campaign_id} not found under {self.root}")
        try:
            return CampaignManifest.model_validate(json.loads(path.read_text(encoding="utf-8")))
        except (ValueError, ValidationError) as e:
            raise StoreError(f"manifest of campaign {campaign_id} is unreadable: {e}") from e

    def save_run(self, campaign_id: str, config_id: str, index: int, trace: RunTrace) -> Path:
        return write_trace_file(trace, self.runs_dir(campaign_id, config_id) / f"{index}{TRACE_SUFFIX}")

    def save_failure(self, campaign_id: str, config_id: str, index: int, reason: str, stderr: str = "") -> Path:
        path = self.runs_dir(campaign_id, config_id) / f"{index}{FAILED_SUFFIX}"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f"{reason}\n{stderr}", encoding="utf-8", newline="\n")
        return path

    def _indexed(self, folder: Path, suffix: str) -> list[tuple[int, Path]]:
        found: list[tuple[int, Path]] = []
        for path in folder.glob(f"*{suffix}"):
            if path.stem.isdigit():
                found.append((int(path.stem), path))
        return sorted(found)

    def load_run_set(self, campaign_id: str, config_id: str, scenario_id: str | None = None) -> RunSet:
        """Reads every stored trace of one configuration, ordered by run index."""
        folder = self.runs_dir(campaign_id, config_id)
        if not folder.is_dir():
            raise StoreError(f"no runs stored for {config_id} in campaign {campaign_id}")
        traces = [read_trace_file(path) for _, path in self._indexed(folder, TRACE_SUFFIX)]
        failed = [
            FailedRun(index, path.read_text(encoding="utf-8").split("\n", 1)[0])
            for index, path in self._indexed(folder, FAILED_SUFFIX)
        ]
        logger.debug(f"Loaded {len(traces)} traces and {len(failed)} failures for {campaign_id}/{config_id}")
        return RunSet.from_traces(traces, config_id=config_id, scenario_id=scenario_id, failed=failed)


__all__ = ["CampaignStore", "MANIFEST"]
