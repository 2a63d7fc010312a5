"""SVG line plots of divergence series and accuracy-vs-Q curves."""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .export import atomic_write_text  # noqa: E402

if TYPE_CHECKING:  # pragma: no cover
    from .evaluation import MetricsReport
    from .rulsif import PeSeries

logger = logging.getLogger(__name__)

# Fixed metadata keeps repeated runs byte-identical.
SVG_METADATA = {"Date": None, "Creator": None}


def _save_svg(fig, path: Union[str, Path]) -> Path:
    buffer = io.StringIO()
    plt.rcParams["svg.hashsalt"] = "causal-cpd"
    fig.savefig(buffer, format="svg", metadata=SVG_METADATA, bbox_inches="tight")
    plt.close(fig)
    return atomic_write_text(path, buffer.getvalue())


def plot_pe_series_svg(
    series: "PeSeries",
    path: Union[str, Path],
    title: Optional[str] = None,
    window_index: Optional[int] = None,
) -> Path:
    """Score against window index, with the winning window marked when given."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    scores = np.where(np.isfinite(series.scores), series.scores, np.nan)
    ax.plot(np.arange(len(scores)), scores, lw=1.0, color="tab:blue")
    if window_index is not None and 0 <= window_index < len(scores):
        ax.axvline(window_index, color="tab:red", ls="--", lw=0.8)
    ax.set_xlabel("window index i")
    ax.set_ylabel("PE score")
    ax.set_title(title or f"component {series.component}, segment {series.config_index}")
    ax.grid(alpha=0.3)
    return _save_svg(fig, path)


def plot_accuracy_svg(
    report: "MetricsReport",
    path: Union[str, Path],
    settings: Optional[Sequence[str]] = None,
) -> Path:
    """accuracy(Q) curves, one line per (setting, method), with standard-error bars."""
    fig, ax = plt.subplots(figsize=(6, 4))
    qs = np.asarray(report.q_grid)
    chosen = set(settings) if settings is not None else None
    multi = len(report.settings) > 1
    for m in report.methods:
        if chosen is not None and m.setting not in chosen:
            continue
        acc = np.array([m.accuracy[q] for q in report.q_grid])
        err = np.array([m.accuracy_stderr[q] for q in report.q_grid])
        label = f"{m.method.value} ({m.setting})" if multi else m.method.value
        ax.errorbar(qs, acc, yerr=err, marker="o", ms=3, capsize=2, lw=1.0, label=label)
    ax.set_xlabel("Q")
    ax.set_ylabel("accuracy(Q)")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    return _save_svg(fig, path)
