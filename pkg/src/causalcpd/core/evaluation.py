"""
Monte-Carlo trial harness: simulate, detect, score against ground truth.

Each trial draws a spec from a derived seed, simulates it and runs every
requested method on the same dataset. A (trial, component) pair is scored by
``|T~ - T_c| / T`` and by whether ``|T~ - T_c| <= Q`` for each Q. Methods
without an estimate for a component are scored with the estimate ``T``.
"""

from __future__ import annotations

import itertools
import logging
import time
from enum import Enum
from functools import partial
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from causalcpd.utils.error_handler import CausalCpdError, ConfigurationError, with_error_handling
from causalcpd.utils.parallel import parallel_map
from causalcpd.utils.progress import ProgressReporter

from .dataset import Dataset
from .detector import argmax_with_ties, detect, project_window
from .rulsif import pe_series
from .scm_gen import GroundTruth, derive_seed, simulate, spec_from_settings
from .segments import Segment, build_segments, position_before
from .types import DetectorConfig, GeneratorSettings, PeParams

logger = logging.getLogger(__name__)


class Method(str, Enum):
    causal_rulsif = "causal-rulsif"
    mean_change = "mean-change"
    rulsif = "rulsif"
    oracle = "oracle"


class TrialBatchConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec_template: GeneratorSettings = Field(default_factory=GeneratorSettings)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    n_trials: int = Field(100, ge=1)
    seed: int = 0
    q_grid: Tuple[int, ...] = (10, 25, 50, 100, 200)
    methods: Tuple[Method, ...] = (Method.causal_rulsif, Method.mean_change)
    oracle_spa: bool = Field(False, description="Inject the true SPA into the detector, skipping discovery")
    setting: Optional[str] = None

    @field_validator("q_grid")
    @classmethod
    def q_grid_positive_increasing(cls, v):
        if not v:
            raise ValueError("q_grid must not be empty")
        if any(q <= 0 for q in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"q_grid must be positive and strictly increasing: {list(v)}")
        return v

    @field_validator("methods")
    @classmethod
    def methods_nonempty(cls, v):
        if not v:
            raise ValueError("at least one method is required")
        return tuple(dict.fromkeys(v))

    @property
    def label(self) -> str:
        if self.setting:
            return self.setting
        g = self.spec_template
        return f"T={g.T} |SPA|={g.spa_size} n_w={self.detector.pe.n_w} {g.change_kind.value}"


class TrialRecord(BaseModel):
    """One scored (trial, method, component) triple."""

    model_config = ConfigDict(frozen=True)

    setting: str
    trial: int
    seed: int
    method: Method
    component: int
    change_point: int
    estimate: Optional[float]
    scored_estimate: float
    abs_error: float
    error: float
    segment_error: Optional[int] = Field(None, description="|W1/W2 boundary - change position| inside the winning segment")
    flag: Optional[str] = None
    seconds: float = Field(0.0, exclude=True)


class TrialFailure(BaseModel):
    model_config = ConfigDict(frozen=True)

    setting: str
    trial: int
    seed: int
    method: Optional[Method]
    error: str


class MethodMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    setting: str
    method: Method
    n_scored: int
    n_failed: int
    mean_error: float
    error_stderr: float
    accuracy: Dict[int, float]
    accuracy_stderr: Dict[int, float]
    mean_seconds: float


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    q_grid: Tuple[int, ...]
    methods: Tuple[MethodMetrics, ...]
    records: Tuple[TrialRecord, ...] = ()
    failures: Tuple[TrialFailure, ...] = ()

    def metrics(self, method: Method, setting: Optional[str] = None) -> MethodMetrics:
        for m in self.methods:
            if m.method == Method(method) and (setting is None or m.setting == setting):
                return m
        raise KeyError(f"no metrics for method {method!r} in setting {setting!r}")

    @property
    def settings(self) -> List[str]:
        return list(dict.fromkeys(m.setting for m in self.methods))


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------
class BaselineEstimate(NamedTuple):
    index: int
    flag: Optional[str] = None


def mean_change_baseline(series: Sequence[float]) -> BaselineEstimate:
    """
    Change-in-mean split: argmax_k |mean(x[:k]) - mean(x[k:])| * sqrt(k (L - k) / L).

    A constant series has no mean change; its midpoint is returned, flagged.
    """
    x = np.asarray(series, dtype=float)
    L = len(x)
    if L < 4:
        raise ValueError(f"mean-change baseline needs at least 4 samples, got {L}")
    if np.ptp(x) == 0:
        return BaselineEstimate(L // 2, "constant")
    k = np.arange(1, L)
    csum = np.cumsum(x)[:-1]
    left = csum / k
    right = (x.sum() - csum) / (L - k)
    stat = np.abs(left - right) * np.sqrt(k * (L - k) / L)
    return BaselineEstimate(int(k[int(np.argmax(stat))]))


def univariate_rulsif_baseline(series: Sequence[int], params: PeParams) -> Optional[Tuple[float, float]]:
    """
    Sliding-window PE on the raw component series, without parent segmentation.

    Returns (projected time, peak score), or None when the series is shorter
    than two half-windows.
    """
    values = np.asarray(series, dtype=np.int64)
    seg = Segment(component=0, config_index=0, config=(), values=values, time_indices=np.arange(len(values)))
    scores = pe_series(seg, params)
    if scores.is_empty:
        return None
    _, i = argmax_with_ties({0: scores})
    _, _, projected = project_window(seg, i, params)
    return projected, float(scores.scores[i])


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------
class TrialOutcome(NamedTuple):
    records: List[TrialRecord]
    failures: List[TrialFailure]


Estimate = Tuple[Optional[float], Optional[str], Optional[int]]


def _causal_rulsif(ds: Dataset, truth: GroundTruth, cfg: TrialBatchConfig) -> List[Estimate]:
    report = detect(ds, cfg.detector, threads=1, spa=truth.spa if cfg.oracle_spa else None)
    out = []
    for j, c in enumerate(report.components):
        if not c.detected:
            out.append((None, c.reason, None))
            continue
        seg = build_segments(ds, c.spa, j)[c.winning_lambda]
        boundary = c.window_index * cfg.detector.pe.n_st + cfg.detector.pe.n_w
        seg_error = abs(boundary - position_before(seg, truth.change_points[j]))
        out.append((c.projected_time, "unbounded" if c.unbounded else None, seg_error))
    return out


def _estimates(method: Method, ds: Dataset, truth: GroundTruth, cfg: TrialBatchConfig) -> List[Estimate]:
    if method is Method.causal_rulsif:
        return _causal_rulsif(ds, truth, cfg)
    if method is Method.mean_change:
        return [(float(b.index), b.flag, None) for b in (mean_change_baseline(ds.values[j]) for j in range(ds.n))]
    if method is Method.rulsif:
        out: List[Estimate] = []
        for j in range(ds.n):
            found = univariate_rulsif_baseline(ds.codes[j], cfg.detector.pe)
            out.append((found[0], None, None) if found else (None, "too_short", None))
        return out
    return [(float(cp), None, None) for cp in truth.change_points]


def run_trial(cfg: TrialBatchConfig, trial: int) -> TrialOutcome:
    """Simulate trial ``trial`` and score every method on it; failures are captured, not raised."""
    seed = derive_seed(cfg.seed, trial)
    setting = cfg.label
    try:
        ds, truth = simulate(spec_from_settings(cfg.spec_template, seed))
    except CausalCpdError as e:
        logger.warning(f"[{setting}] trial {trial}: generation failed: {e}")
        return TrialOutcome([], [TrialFailure(setting=setting, trial=trial, seed=seed, method=None, error=str(e))])

    records: List[TrialRecord] = []
    failures: List[TrialFailure] = []
    for method in cfg.methods:
        start = time.perf_counter()
        try:
            estimates = _estimates(method, ds, truth, cfg)
        except (CausalCpdError, ValueError, ArithmeticError) as e:
            logger.warning(f"[{setting}] trial {trial}: {method.value} failed: {e}")
            failures.append(TrialFailure(setting=setting, trial=trial, seed=seed, method=method, error=str(e)))
            continue
        seconds = time.perf_counter() - start
        for j, (estimate, flag, seg_error) in enumerate(estimates):
            cp = truth.change_points[j]
            scored = float(ds.T) if estimate is None else float(estimate)
            records.append(
                TrialRecord(
                    setting=setting,
                    trial=trial,
                    seed=seed,
                    method=method,
                    component=j,
                    change_point=cp,
                    estimate=estimate,
                    scored_estimate=scored,
                    abs_error=abs(scored - cp),
                    error=abs(scored - cp) / ds.T,
                    segment_error=seg_error,
                    flag=flag,
                    seconds=seconds,
                )
            )
    return TrialOutcome(records, failures)


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def method_metrics(
    setting: str,
    method: Method,
    records: Sequence[TrialRecord],
    failures: Sequence[TrialFailure],
    q_grid: Sequence[int],
) -> MethodMetrics:
    """Mean and standard error of the estimation error, plus accuracy(Q), over the given records."""
    errors = np.array([r.error for r in records], dtype=float)
    abs_errors = np.array([r.abs_error for r in records], dtype=float)
    accuracy, accuracy_stderr = {}, {}
    for q in q_grid:
        hits = (abs_errors <= q).astype(float)
        accuracy[q] = float(hits.mean()) if len(hits) else 0.0
        accuracy_stderr[q] = _stderr(hits)
    trials = {r.trial: r.seconds for r in records}
    n_failed = sum(1 for f in failures if f.method is None or f.method == method)
    return MethodMetrics(
        setting=setting,
        method=method,
        n_scored=len(records),
        n_failed=n_failed,
        mean_error=float(errors.mean()) if len(errors) else float("nan"),
        error_stderr=_stderr(errors),
        accuracy=accuracy,
        accuracy_stderr=accuracy_stderr,
        mean_seconds=float(np.mean(list(trials.values()))) if trials else 0.0,
    )


def aggregate(
    outcomes: Iterable[TrialOutcome],
    q_grid: Sequence[int],
    settings: Sequence[str],
    methods: Sequence[Method],
) -> MetricsReport:
    """Fold trial outcomes in trial order into one report."""
    records: List[TrialRecord] = []
    failures: List[TrialFailure] = []
    for outcome in outcomes:
        records.extend(outcome.records)
        failures.extend(outcome.failures)
    metrics = []
    for setting, method in itertools.product(settings, methods):
        metrics.append(
            method_metrics(
                setting,
                method,
                [r for r in records if r.setting == setting and r.method == method],
                [f for f in failures if f.setting == setting],
                q_grid,
            )
        )
    return MetricsReport(q_grid=tuple(q_grid), methods=tuple(metrics), records=tuple(records), failures=tuple(failures))


@with_error_handling(context="run_batch", show_traceback=True)
def run_batch(
    cfg: TrialBatchConfig,
    threads: int = 1,
    progress: Optional[ProgressReporter] = None,
) -> MetricsReport:
    """Run ``cfg.n_trials`` trials as a parallel map over derived seeds and aggregate them."""
    logger.info(f"[{cfg.label}] {cfg.n_trials} trial(s), methods {[m.value for m in cfg.methods]}")
    outcomes = parallel_map(partial(run_trial, cfg), range(cfg.n_trials), threads, progress)
    report = aggregate(outcomes, cfg.q_grid, [cfg.label], cfg.methods)
    if report.failures:
        logger.warning(f"[{cfg.label}] {len(report.failures)} trial failure(s) excluded from the metrics")
    return report


def _revalidated(model: BaseModel, **changes) -> BaseModel:
    return type(model).model_validate({**model.model_dump(), **changes})


def sweep_configs(
    cfg: TrialBatchConfig,
    t_values: Optional[Sequence[int]] = None,
    spa_values: Optional[Sequence[int]] = None,
    nw_values: Optional[Sequence[int]] = None,
) -> List[TrialBatchConfig]:
    """One batch config per (T, |SPA|, n_w) combination, in that nesting order."""
    g, pe = cfg.spec_template, cfg.detector.pe
    min_length = cfg.detector.min_segment_length
    if min_length is not None and nw_values:
        too_wide = [nw for nw in nw_values if 2 * nw + 1 > min_length]
        if too_wide:
            raise ConfigurationError(
                f"min_segment_length={min_length} is shorter than two windows for n_w in {too_wide}; "
                "raise it or leave it unset"
            )
    out = []
    for t, spa, nw in itertools.product(t_values or [g.T], spa_values or [g.spa_size], nw_values or [pe.n_w]):
        template = _revalidated(g, T=t, spa_size=spa)
        detector = _revalidated(cfg.detector, pe=_revalidated(pe, n_w=nw).model_dump())
        out.append(cfg.model_copy(update={"spec_template": template, "detector": detector, "setting": None}))
    return out


def run_sweep(
    cfg: TrialBatchConfig,
    t_values: Optional[Sequence[int]] = None,
    spa_values: Optional[Sequence[int]] = None,
    nw_values: Optional[Sequence[int]] = None,
    threads: int = 1,
    progress: Optional[ProgressReporter] = None,
) -> MetricsReport:
    """:func:`run_batch` for every setting of the sweep, merged into one report."""
    configs = sweep_configs(cfg, t_values, spa_values, nw_values)
    outcomes: List[TrialOutcome] = []
    for sub in configs:
        logger.info(f"Setting {sub.label}")
        outcomes.extend(parallel_map(partial(run_trial, sub), range(sub.n_trials), threads, progress))
    return aggregate(outcomes, cfg.q_grid, [c.label for c in configs], cfg.methods)
