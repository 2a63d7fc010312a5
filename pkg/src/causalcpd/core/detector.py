"""
Change point detection in causal mechanisms.

Pipeline per dataset: superset parents (or injected ones), then per
component the parent-configuration segments, a divergence series on each
usable segment, the global peak over (segment, window), the projection of
that window back to original time, and optionally the pruning of parent
sets on either side of it.
"""

from __future__ import annotations

import logging
import math
from functools import partial
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from causalcpd.utils.error_handler import NoUsableSegmentsError
from causalcpd.utils.parallel import parallel_map

from .dataset import Dataset
from .pcmci import discover_superset, refine_after_split
from .rulsif import PeSeries, pe_series
from .segments import Segment, build_segments
from .types import DetectorConfig, LaggedParentSet, PeParams, ParentGraph, link

logger = logging.getLogger(__name__)


def argmax_with_ties(series_map: Mapping[int, PeSeries]) -> Tuple[int, int]:
    """
    Global argmax over (Λ, i); ties go to the smaller Λ, then the smaller i.

    Raises:
        NoUsableSegmentsError: when every series is empty.
    """
    best: Optional[Tuple[float, int, int]] = None
    for lam in sorted(series_map):
        scores = series_map[lam].scores
        if len(scores) == 0:
            continue
        i = int(np.argmax(scores))
        if best is None or scores[i] > best[0]:
            best = (float(scores[i]), lam, i)
    if best is None:
        raise NoUsableSegmentsError("every divergence series is empty")
    return best[1], best[2]


def project_window(seg: Segment, window_index: int, params: PeParams) -> Tuple[int, int, float]:
    """
    Original times (t_a, t_b) around the W1/W2 boundary of window ``window_index`` and their midpoint.

    t_a is the last sample of the first half, t_b the first of the second.
    """
    p_a = window_index * params.n_st + params.n_w - 1
    t_a = int(seg.time_indices[p_a])
    t_b = int(seg.time_indices[p_a + 1])
    return t_a, t_b, (t_a + t_b) / 2.0


class SkippedSegment(BaseModel):
    model_config = ConfigDict(frozen=True)

    config_index: int
    length: int
    reason: str


class ComponentDetection(BaseModel):
    """Outcome for one component: the winning segment and window, or why there is none."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    component: int
    name: str
    spa: LaggedParentSet
    spa_fallback: bool = False
    detected: bool = False
    reason: Optional[str] = None
    winning_lambda: Optional[int] = None
    winning_config: Optional[Tuple[int, ...]] = None
    window_index: Optional[int] = None
    t_a: Optional[int] = None
    t_b: Optional[int] = None
    projected_time: Optional[float] = None
    projected_label: Optional[str] = None
    peak_score: Optional[float] = None
    significant: Optional[bool] = None
    unbounded: bool = False
    parents_pre: Optional[LaggedParentSet] = None
    parents_post: Optional[LaggedParentSet] = None
    refine_flags: Tuple[str, ...] = ()
    skipped_segments: Tuple[SkippedSegment, ...] = ()
    pe_series_all: Dict[int, Any] = Field(default_factory=dict, exclude=True, repr=False)

    @property
    def has_estimate(self) -> bool:
        return self.projected_time is not None

    @property
    def winning_series(self) -> Optional[PeSeries]:
        if self.winning_lambda is None:
            return None
        return self.pe_series_all.get(self.winning_lambda)


def _score_json(value: Optional[float]) -> Any:
    if value is None or math.isfinite(value):
        return value
    return "inf" if value > 0 else "-inf"


class DetectionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    T: int
    component_names: Tuple[str, ...]
    spa_hat: ParentGraph
    oracle_spa: bool = False
    config: DetectorConfig
    components: Tuple[ComponentDetection, ...]

    def component(self, j: int) -> ComponentDetection:
        return self.components[j]

    @property
    def projected_times(self) -> List[Optional[float]]:
        return [c.projected_time for c in self.components]

    def to_json(self) -> Dict[str, Any]:
        names = self.component_names
        out = []
        for c in self.components:
            out.append(
                {
                    "component": c.name,
                    "detected": c.detected,
                    "reason": c.reason,
                    "projected_time": c.projected_time,
                    "projected_label": c.projected_label,
                    "t_a": c.t_a,
                    "t_b": c.t_b,
                    "winning_lambda": c.winning_lambda,
                    "winning_config": list(c.winning_config) if c.winning_config is not None else None,
                    "window_index": c.window_index,
                    "peak_score": _score_json(c.peak_score),
                    "significant": c.significant,
                    "unbounded": c.unbounded,
                    "spa": c.spa.to_named(names),
                    "spa_fallback": c.spa_fallback,
                    "parents_pre": c.parents_pre.to_named(names) if c.parents_pre is not None else None,
                    "parents_post": c.parents_post.to_named(names) if c.parents_post is not None else None,
                    "refine_flags": list(c.refine_flags),
                    "skipped_segments": [s.model_dump() for s in c.skipped_segments],
                    "series_lengths": {str(lam): len(series) for lam, series in sorted(c.pe_series_all.items())},
                }
            )
        return {
            "T": self.T,
            "components": out,
            "spa_hat": self.spa_hat.to_named(names),
            "oracle_spa": self.oracle_spa,
            "config": self.config.model_dump(mode="json"),
        }


def detect_component(ds: Dataset, cfg: DetectorConfig, item: Tuple[int, LaggedParentSet]) -> ComponentDetection:
    """Segments, divergence series, argmax and projection for one component."""
    j, spa = item
    name = ds.component_names[j]
    fallback = False
    if len(spa) == 0:
        logger.warning(f"{name}: discovery found no parents; segmenting on the self-lag {name}(t-1)")
        spa = LaggedParentSet.from_links([link(j, 1)])
        fallback = True

    min_length = cfg.effective_min_segment_length
    series_map: Dict[int, PeSeries] = {}
    skipped: List[SkippedSegment] = []
    segments = build_segments(ds, spa, j)
    for seg in segments:
        if seg.length < min_length:
            reason = "empty" if seg.is_empty else f"length {seg.length} < {min_length}"
            skipped.append(SkippedSegment(config_index=seg.config_index, length=seg.length, reason=reason))
            continue
        series_map[seg.config_index] = pe_series(seg, cfg.pe)
    if skipped:
        logger.debug(f"{name}: skipped {len(skipped)}/{len(segments)} segments")

    base = dict(component=j, name=name, spa=spa, spa_fallback=fallback, skipped_segments=tuple(skipped))
    if not series_map:
        logger.warning(f"{name}: no segment reaches {min_length} samples, no detection")
        return ComponentDetection(**base, reason=f"no segment with at least {min_length} samples")

    lam, i = argmax_with_ties(series_map)
    seg = segments[lam]
    peak = float(series_map[lam].scores[i])
    t_a, t_b, projected = project_window(seg, i, cfg.pe)
    unbounded = math.isinf(peak)
    if unbounded:
        logger.warning(f"{name}: +inf divergence wins at segment {lam}; the windows have disjoint support")

    significant = None
    reason = None
    if cfg.score_threshold is not None:
        significant = peak >= cfg.score_threshold
        if not significant:
            reason = f"no significant change: peak {peak:.4f} < threshold {cfg.score_threshold}"
    if peak <= 0.0 and significant is not False:
        # every window of every segment scored zero
        significant = False
        reason = "no significant change: peak 0"

    logger.info(f"{name}: peak PE {peak:.4f} at segment {lam}, window {i} -> T~ = {projected:.1f}")
    return ComponentDetection(
        **base,
        detected=significant is not False,
        reason=reason,
        winning_lambda=lam,
        winning_config=seg.config,
        window_index=i,
        t_a=t_a,
        t_b=t_b,
        projected_time=projected,
        projected_label=ds.label_at(t_b),
        peak_score=peak,
        significant=significant,
        unbounded=unbounded,
        pe_series_all=series_map,
    )


def detect(
    ds: Dataset,
    cfg: DetectorConfig,
    threads: int = 1,
    spa: Optional[ParentGraph] = None,
) -> DetectionReport:
    """
    Locate one change point per component.

    ``spa`` injects known union parent sets and skips discovery. With
    ``cfg.refine`` the parent sets are pruned before and after each
    detected change point.
    """
    oracle = spa is not None
    spa_hat = spa if oracle else discover_superset(ds, cfg.discovery, threads)
    if spa_hat.n != ds.n:
        raise ValueError(f"parent graph covers {spa_hat.n} components, dataset has {ds.n}")

    components = parallel_map(partial(detect_component, ds, cfg), list(enumerate(spa_hat.parents)), threads)

    if cfg.refine:
        split_times = [c.projected_time if c.detected else None for c in components]
        refinement = refine_after_split(ds, spa_hat, split_times, cfg.discovery, threads)
        components = [
            c.model_copy(
                update={
                    "parents_pre": refinement.pre[j],
                    "parents_post": refinement.post[j],
                    "refine_flags": tuple(refinement.unpruned.get(j, [])),
                }
            )
            for j, c in enumerate(components)
        ]

    return DetectionReport(
        T=ds.T,
        component_names=ds.component_names,
        spa_hat=spa_hat,
        oracle_spa=oracle,
        config=cfg,
        components=tuple(components),
    )


def significance_threshold(null_peaks: Sequence[float], quantile: float = 0.99) -> float:
    """Score threshold from peak scores observed on change-free data."""
    peaks = np.asarray([p for p in null_peaks if math.isfinite(p)], dtype=float)
    if len(peaks) == 0:
        raise ValueError("no finite null peak scores")
    return float(np.quantile(peaks, quantile))
