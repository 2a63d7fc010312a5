"""Artifact writers: atomic file output, JSON/CSV exports and human-readable tables."""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from causalcpd.utils.error_handler import ArtifactIOError

from .constants import SEGMENT_DUMP_INDEX

if TYPE_CHECKING:  # pragma: no cover
    from .detector import DetectionReport
    from .evaluation import MetricsReport
    from .rulsif import PeSeries
    from .segments import Segment

PathLike = Union[str, Path]


def _checked_path(path: PathLike) -> Path:
    if path is None or str(path).strip() == "":
        raise ArtifactIOError("empty output path")
    return Path(path).expanduser()


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """
    Write ``data`` to ``path`` through a temporary file and a rename.

    Readers never observe a partially written artifact.
    """
    target = _checked_path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise ArtifactIOError(f"could not write {target}: {e}") from e
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: PathLike, payload: Any) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=False) + "\n")


def read_json(path: PathLike) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ArtifactIOError(f"could not read {path}: {e}") from e


def write_frame_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    return atomic_write_text(path, frame.to_csv(index=False))


# ---------------------------------------------------------------------------
# Segments and divergence series
# ---------------------------------------------------------------------------
def segment_file_name(component: int, config_index: int) -> str:
    return f"seg_c{component}_l{config_index}.csv"


def dump_segments(
    segments: Sequence["Segment"],
    out_dir: PathLike,
    symbols: Sequence[int],
    component_names: Sequence[str],
    parent_sets: Dict[int, List[List]],
) -> List[Path]:
    """One CSV per segment with columns (t, value), plus an index document."""
    out_dir = _checked_path(out_dir)
    table = np.asarray(symbols)
    written = []
    for seg in segments:
        frame = pd.DataFrame({"t": seg.time_indices, "value": table[seg.values]})
        written.append(write_frame_csv(out_dir / segment_file_name(seg.component, seg.config_index), frame))
    index = {
        "domain": [int(s) for s in symbols],
        "components": list(component_names),
        "parents": {str(k): v for k, v in parent_sets.items()},
        "segments": [
            {
                "component": seg.component,
                "config_index": seg.config_index,
                "config": [int(c) for c in seg.config],
                "length": seg.length,
                "file": segment_file_name(seg.component, seg.config_index),
            }
            for seg in segments
        ],
    }
    write_json(out_dir / SEGMENT_DUMP_INDEX, index)
    return written


def pe_series_frame(series: "PeSeries") -> pd.DataFrame:
    return pd.DataFrame(
        {
            "i": np.arange(len(series.scores)),
            "t_mid": series.midpoints(),
            "score": series.scores,
        }
    )


def write_pe_series_csv(path: PathLike, series: "PeSeries") -> Path:
    return write_frame_csv(path, pe_series_frame(series))


# ---------------------------------------------------------------------------
# Detection reports
# ---------------------------------------------------------------------------
def detection_table(report: "DetectionReport") -> Table:
    """Component, projected change point and parent sets before/after it."""
    names = report.component_names
    table = Table(title="Change point detection")
    table.add_column("X")
    table.add_column("T~ (projected)", justify="right")
    table.add_column("time label")
    table.add_column("peak PE", justify="right")
    table.add_column("parents before")
    table.add_column("parents after")
    for comp in report.components:
        if not comp.has_estimate:
            table.add_row(comp.name, "-", "", "", comp.reason or "no detection", "")
            continue
        pre = comp.parents_pre if comp.parents_pre is not None else comp.spa
        post = comp.parents_post if comp.parents_post is not None else comp.spa
        peak = "inf" if comp.peak_score == float("inf") else f"{comp.peak_score:.4f}"
        if comp.significant is False:
            peak += " (n.s.)"
        table.add_row(
            comp.name,
            f"{comp.projected_time:.1f}",
            comp.projected_label or "",
            peak,
            pre.describe(names),
            post.describe(names),
        )
    return table


def render_table_text(table: Table, width: int = 140) -> str:
    buffer = io.StringIO()
    Console(file=buffer, width=width, force_terminal=False, color_system=None).print(table)
    return buffer.getvalue()


def write_report_json(path: PathLike, report: "DetectionReport") -> Path:
    return write_json(path, report.to_json())


# ---------------------------------------------------------------------------
# Evaluation metrics
# ---------------------------------------------------------------------------
def metrics_frame(report: "MetricsReport") -> pd.DataFrame:
    rows = []
    for m in report.methods:
        for q in report.q_grid:
            rows.append(
                {
                    "setting": m.setting,
                    "method": m.method.value,
                    "Q": q,
                    "accuracy": m.accuracy[q],
                    "stderr": m.accuracy_stderr[q],
                    "mean_error": m.mean_error,
                    "error_stderr": m.error_stderr,
                    "n_scored": m.n_scored,
                    "n_failed": m.n_failed,
                }
            )
    return pd.DataFrame(rows)


def write_metrics_csv(path: PathLike, report: "MetricsReport") -> Path:
    return write_frame_csv(path, metrics_frame(report))


def write_records_jsonl(path: PathLike, records: Iterable[Any]) -> Path:
    lines = [r.model_dump_json() for r in records]
    return atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def metrics_table(report: "MetricsReport", q_subset: Optional[Sequence[int]] = None) -> Table:
    qs = list(q_subset or report.q_grid)
    table = Table(title="Estimation error and accuracy(Q)")
    table.add_column("setting")
    table.add_column("method")
    table.add_column("mean |T~-Tc|/T", justify="right")
    for q in qs:
        table.add_column(f"acc(Q={q})", justify="right")
    table.add_column("failed", justify="right")
    for m in report.methods:
        table.add_row(
            m.setting,
            m.method.value,
            f"{m.mean_error:.4f} ± {m.error_stderr:.4f}",
            *[f"{m.accuracy[q]:.3f}" for q in qs],
            str(m.n_failed),
        )
    return table


def render_detection_table(report: "DetectionReport") -> str:
    return render_table_text(detection_table(report))


def render_metrics_table(report: "MetricsReport", q_subset: Optional[Sequence[int]] = None) -> str:
    return render_table_text(metrics_table(report, q_subset))
