"""
Output Writers
CSV tables, JSON documents and the per-directory run manifest.

Every subcommand writes into one output directory through a RunRecorder,
which records a SHA-256 digest of each file and finishes with exactly one
manifest.json.
"""

import hashlib
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from skg import __version__
from skg.config import RunConfig
from skg.simulation.simulator import Trace
from skg.spectral.lattice import Field

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


# ==================== Models ====================

class RunManifest(BaseModel):
    command: str
    version: str
    seed: int
    config: Dict[str, Any]
    started_at: str
    finished_at: str
    files: Dict[str, str]


# ==================== Tables ====================

def trace_frame(trace: Trace) -> pd.DataFrame:
    return pd.DataFrame({"time": trace.times, "m": trace.order_param, "var": trace.variance})


def field_frame(field: Field) -> pd.DataFrame:
    return pd.DataFrame({"site": np.arange(field.spec.size), "value": field.values})


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Header row, no index, shortest round-trip decimals"""
    frame.to_csv(path, index=False, float_format=None, lineterminator="\n")
    return path


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# ==================== Recorder ====================

class RunRecorder:
    """
    Collects the files of one subcommand invocation

    Args:
        out_dir: output directory (created if missing)
        command: subcommand name
        config: resolved configuration, echoed into the manifest
    """

    def __init__(self, out_dir: str, command: str, config: RunConfig):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.started_at = _utc_now()
        self.files: List[Path] = []

    def _track(self, path: Path) -> Path:
        self.files.append(path)
        logger.info("✓ wrote %s", path)
        return path

    def frame(self, name: str, frame: pd.DataFrame) -> Path:
        return self._track(write_csv(frame, self.out_dir / name))

    def text(self, name: str, content: str, directory: Optional[str] = None) -> Path:
        """Write a text file, into `directory` when given (created if missing)"""
        folder = Path(directory) if directory else self.out_dir
        folder.mkdir(parents=True, exist_ok=True)
        path = folder / name
        path.write_text(content, encoding="utf-8")
        return self._track(path)

    def model(self, name: str, document: BaseModel) -> Path:
        return self.text(name, document.model_dump_json(indent=2) + "\n")

    def _relative(self, path: Path) -> str:
        """Manifest key: path relative to the output directory"""
        return Path(os.path.relpath(path, self.out_dir)).as_posix()

    def finish(self) -> RunManifest:
        manifest = RunManifest(
            command=self.command,
            version=__version__,
            seed=self.config.seed,
            config=self.config.snapshot(),
            started_at=self.started_at,
            finished_at=_utc_now(),
            files={self._relative(p): file_digest(p) for p in self.files},
        )
        path = self.out_dir / MANIFEST_NAME
        path.write_text(json.dumps(manifest.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return manifest


def load_manifest(out_dir: str) -> Optional[RunManifest]:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.is_file():
        return None
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
