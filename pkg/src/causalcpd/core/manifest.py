"""Run manifests: everything needed to reproduce a CLI run, written next to its outputs."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from causalcpd import __version__
from causalcpd.utils.error_handler import ArtifactIOError, with_error_handling

from .constants import MANIFEST_NAME
from .export import write_json

logger = logging.getLogger(__name__)


def file_digest(path: Union[str, Path]) -> str:
    """sha256 of a file, or of every file below a directory in sorted order."""
    path = Path(path)
    digest = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    try:
        for f in files:
            if path.is_dir():
                digest.update(str(f.relative_to(path)).encode("utf-8"))
            with open(f, "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 16), b""):
                    digest.update(chunk)
    except OSError as e:
        raise ArtifactIOError(f"could not hash {path}: {e}") from e
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """
    Resolved configuration, seeds, input digests and outputs of one run.

    ``config`` holds every value the command used, defaults included, so a
    manifest passed back through ``--config`` reproduces the run.
    """

    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    sources: Dict[str, str] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    tool_version: str = __version__
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    seconds: Optional[float] = None
    version: int = 1
    _clock: float = field(default_factory=time.perf_counter, repr=False, compare=False)

    @classmethod
    def build(
        cls,
        command: str,
        config: Dict[str, Any],
        sources: Optional[Dict[str, str]] = None,
        seeds: Optional[Dict[str, int]] = None,
        inputs: Optional[List[Union[str, Path]]] = None,
    ) -> "RunManifest":
        manifest = cls(command=command, config=dict(config), sources=dict(sources or {}), seeds=dict(seeds or {}))
        for p in inputs or []:
            manifest.inputs[str(p)] = file_digest(p)
        return manifest

    def add_output(self, path: Union[str, Path]) -> None:
        self.outputs.append(str(path))

    def finish(self) -> "RunManifest":
        self.finished_at = _now()
        self.seconds = round(time.perf_counter() - self._clock, 3)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "tool_version": self.tool_version,
            "version": self.version,
            "config": self.config,
            "sources": self.sources,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timing": {"started_at": self.started_at, "finished_at": self.finished_at, "seconds": self.seconds},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        timing = data.get("timing", {})
        return cls(
            command=data["command"],
            config=dict(data.get("config", {})),
            sources=dict(data.get("sources", {})),
            seeds=dict(data.get("seeds", {})),
            inputs=dict(data.get("inputs", {})),
            outputs=list(data.get("outputs", [])),
            tool_version=data.get("tool_version", __version__),
            started_at=timing.get("started_at", _now()),
            finished_at=timing.get("finished_at"),
            seconds=timing.get("seconds"),
            version=data.get("version", 1),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ArtifactIOError(f"could not read manifest {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ArtifactIOError(f"manifest {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict) or "command" not in data:
            raise ArtifactIOError(f"{path} is not a run manifest")
        return cls.from_dict(data)

    @with_error_handling(context="RunManifest.save")
    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        written = write_json(path, self.to_dict())
        logger.debug(f"Wrote manifest {written}")
        return written

    def verify_inputs(self) -> List[str]:
        """Inputs whose current digest differs from the recorded one."""
        changed = []
        for p, recorded in self.inputs.items():
            if not Path(p).exists() or file_digest(p) != recorded:
                changed.append(p)
        return changed
