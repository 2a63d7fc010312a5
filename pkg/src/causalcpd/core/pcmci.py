"""
Superset-parent discovery and post-split parent refinement.

Discovery runs the two PCMCI phases on each of ``n_intervals`` consecutive
intervals and unites the links retained anywhere. Each regime dominates at
least one interval when the change points sit away from the boundaries, so
the union covers the parents of both regimes.
"""

from __future__ import annotations

import itertools
import logging
import math
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from causalcpd.utils.error_handler import DiscoveryError
from causalcpd.utils.parallel import parallel_map

from .citest import CiQuery, g_test
from .dataset import Dataset
from .types import DiscoveryConfig, LaggedLink, LaggedParentSet, ParentGraph, link

logger = logging.getLogger(__name__)

TimeRange = Tuple[int, int]


def candidate_links(n: int, tau_ub: int) -> List[LaggedLink]:
    """Every (component, lag) with lag in [1, tau_ub], in (component, lag) order."""
    return [link(i, lag) for i in range(n) for lag in range(1, tau_ub + 1)]


def interval_ranges(T: int, cfg: DiscoveryConfig) -> List[TimeRange]:
    """Split [tau_ub, T) into ``n_intervals`` consecutive near-equal ranges."""
    chunks = np.array_split(np.arange(cfg.tau_ub, T), cfg.n_intervals)
    return [(int(c[0]), int(c[-1]) + 1) if len(c) else (cfg.tau_ub, cfg.tau_ub) for c in chunks]


# ---------------------------------------------------------------------------
# Phase one: condition selection
# ---------------------------------------------------------------------------
class SelectedParents(BaseModel):
    """Parents retained by condition selection, strongest first, with their weakest statistic."""

    model_config = ConfigDict(frozen=True)

    component: int
    ranked: Tuple[LaggedLink, ...]
    strength: Tuple[float, ...]

    @property
    def parents(self) -> LaggedParentSet:
        return LaggedParentSet.from_links(self.ranked)


def _rank(strength: Dict[LaggedLink, float]) -> List[LaggedLink]:
    return sorted(strength, key=lambda lk: (-strength[lk], lk.component, lk.lag))


def select_parents(ds: Dataset, j: int, cfg: DiscoveryConfig, t_range: TimeRange) -> SelectedParents:
    """
    Iteratively prune the candidate parents of X^j_t.

    At conditioning size p each remaining candidate is tested given
    combinations of the strongest other candidates (at most
    ``max_combinations`` of them); a candidate found independent once is
    dropped at the end of the round. Survivors are re-ranked by the smallest
    statistic they showed.
    """
    strength: Dict[LaggedLink, float] = {lk: math.inf for lk in candidate_links(ds.n, cfg.tau_ub)}
    parents = _rank(strength)
    for p in range(cfg.pc_max_conds + 1):
        if len(parents) - 1 < p:
            break
        removed = []
        for x in parents:
            others = [lk for lk in parents if lk != x]
            for comb_index, Z in enumerate(itertools.combinations(others, p)):
                if comb_index >= cfg.max_combinations:
                    break
                verdict = g_test(
                    ds,
                    CiQuery(x=x, y=j, cond=LaggedParentSet.from_links(Z), alpha_level=cfg.alpha_level),
                    t_range,
                )
                strength[x] = min(strength[x], verdict.statistic)
                if verdict.independent:
                    removed.append(x)
                    break
        for x in removed:
            del strength[x]
        parents = _rank(strength)
    logger.debug(f"X{j + 1}: {len(parents)} candidate parents after selection on {t_range}")
    return SelectedParents(component=j, ranked=tuple(parents), strength=tuple(strength[lk] for lk in parents))


# ---------------------------------------------------------------------------
# Phase two: momentary conditional independence
# ---------------------------------------------------------------------------
def mci_conditions(
    x: LaggedLink,
    selected_j: SelectedParents,
    selected_i: SelectedParents,
    max_conds_px: Optional[int] = None,
) -> LaggedParentSet:
    """Selected parents of the target without x, plus the cause's own parents shifted by x.lag."""
    own = selected_j.parents.without(x)
    cause = selected_i.ranked if max_conds_px is None else selected_i.ranked[:max_conds_px]
    shifted = LaggedParentSet.from_links(lk.shifted(x.lag) for lk in cause)
    return own.union(shifted).without(x)


def mci_links(
    ds: Dataset,
    j: int,
    selected: Sequence[SelectedParents],
    cfg: DiscoveryConfig,
    t_range: TimeRange,
) -> LaggedParentSet:
    retained = []
    for x in candidate_links(ds.n, cfg.tau_ub):
        cond = mci_conditions(x, selected[j], selected[x.component], cfg.max_conds_px)
        verdict = g_test(ds, CiQuery(x=x, y=j, cond=cond, alpha_level=cfg.alpha_level), t_range)
        if not verdict.independent:
            retained.append(x)
    return LaggedParentSet.from_links(retained)


def _check_interval(ds: Dataset, cfg: DiscoveryConfig, index: int, t_range: TimeRange) -> None:
    needed = cfg.min_interval_samples(ds.s)
    length = t_range[1] - t_range[0]
    if length < needed:
        raise DiscoveryError(
            f"interval {index} [{t_range[0]}, {t_range[1]}) holds {length} samples; "
            f"CI testing needs at least {needed} per interval (T >= {cfg.tau_ub + cfg.n_intervals * needed})"
        )


def discover_interval(ds: Dataset, cfg: DiscoveryConfig, t_range: TimeRange, threads: int = 1) -> ParentGraph:
    """Both phases on the target times in ``t_range``; per-component work is a parallel map."""
    components = range(ds.n)
    selected = parallel_map(partial(_select_for, ds, cfg, t_range), components, threads)
    graph = parallel_map(partial(_mci_for, ds, cfg, t_range, tuple(selected)), components, threads)
    return ParentGraph(parents=tuple(graph))


def _select_for(ds: Dataset, cfg: DiscoveryConfig, t_range: TimeRange, j: int) -> SelectedParents:
    return select_parents(ds, j, cfg, t_range)


def _mci_for(
    ds: Dataset, cfg: DiscoveryConfig, t_range: TimeRange, selected: Tuple[SelectedParents, ...], j: int
) -> LaggedParentSet:
    return mci_links(ds, j, selected, cfg, t_range)


def discover_superset(ds: Dataset, cfg: DiscoveryConfig, threads: int = 1) -> ParentGraph:
    """
    Union of :func:`discover_interval` over the consecutive intervals of [tau_ub, T).

    Raises:
        DiscoveryError: when an interval is shorter than
            ``min_samples_factor * s^(pc_max_conds + 2)``.
    """
    ranges = interval_ranges(ds.T, cfg)
    for index, t_range in enumerate(ranges):
        _check_interval(ds, cfg, index, t_range)

    logger.info(
        f"Discovering superset parents: tau_ub={cfg.tau_ub}, alpha_level={cfg.alpha_level}, "
        f"{cfg.n_intervals} interval(s) {ranges}"
    )
    graph = ParentGraph.empty(ds.n)
    for t_range in ranges:
        graph = graph.union(discover_interval(ds, cfg, t_range, threads))
    for j, parents in enumerate(graph.parents):
        logger.debug(f"SPA({ds.component_names[j]}) = {parents.describe(ds.component_names)}")
    return graph


# ---------------------------------------------------------------------------
# Refinement after the change point is located
# ---------------------------------------------------------------------------
class Refinement(BaseModel):
    """Parent graphs pruned on the samples before and after each component's split time."""

    model_config = ConfigDict(frozen=True)

    pre: ParentGraph
    post: ParentGraph
    unpruned: Dict[int, List[str]] = Field(default_factory=dict, description="Component -> sides left unpruned")


def side_ranges(T: int, spa_hat: ParentGraph, split_time: float) -> Tuple[TimeRange, TimeRange]:
    """Target times with t < split_time, and with t >= split_time."""
    start = spa_hat.max_lag
    cut = int(math.ceil(split_time))
    return (start, max(start, cut)), (max(start, cut), T)


def prune_side(
    ds: Dataset,
    j: int,
    spa_hat: ParentGraph,
    cfg: DiscoveryConfig,
    t_range: TimeRange,
) -> LaggedParentSet:
    """Drop each x in SPA(X^j) independent of X^j_t given (SPA(X^j) ∪ SPA(x shifted)) minus x."""
    kept = []
    for x in spa_hat[j].links:
        cond = spa_hat[j].union(spa_hat[x.component].shifted(x.lag)).without(x)
        verdict = g_test(ds, CiQuery(x=x, y=j, cond=cond, alpha_level=cfg.alpha_level), t_range)
        if not verdict.independent:
            kept.append(x)
    return LaggedParentSet.from_links(kept)


def _refine_component(
    ds: Dataset,
    spa_hat: ParentGraph,
    cfg: DiscoveryConfig,
    item: Tuple[int, Optional[float]],
) -> Tuple[LaggedParentSet, LaggedParentSet, List[str]]:
    j, split_time = item
    if split_time is None:
        return spa_hat[j], spa_hat[j], ["pre", "post"]
    needed = cfg.min_interval_samples(ds.s)
    sides, unpruned = [], []
    for name, t_range in zip(("pre", "post"), side_ranges(ds.T, spa_hat, split_time)):
        if t_range[1] - t_range[0] < needed or len(spa_hat[j]) == 0:
            logger.warning(
                f"{ds.component_names[j]}: {name}-change side [{t_range[0]}, {t_range[1]}) is too short "
                f"to refine (need {needed}); returning SPA unpruned"
            )
            sides.append(spa_hat[j])
            unpruned.append(name)
        else:
            sides.append(prune_side(ds, j, spa_hat, cfg, t_range))
    return sides[0], sides[1], unpruned


def refine_after_split(
    ds: Dataset,
    spa_hat: ParentGraph,
    split_times: Sequence[Optional[float]],
    cfg: DiscoveryConfig,
    threads: int = 1,
) -> Refinement:
    """
    Prune every component's SPA separately on each side of its split time.

    Pruning never adds links. A side with fewer than
    ``min_samples_factor * s^(pc_max_conds + 2)`` samples, or a component
    without a split time, keeps its SPA and is listed in ``unpruned``.
    """
    if len(split_times) != ds.n:
        raise ValueError(f"{len(split_times)} split times for {ds.n} components")
    results = parallel_map(
        partial(_refine_component, ds, spa_hat, cfg), list(enumerate(split_times)), threads
    )
    pre = ParentGraph(parents=tuple(r[0] for r in results))
    post = ParentGraph(parents=tuple(r[1] for r in results))
    unpruned = {j: r[2] for j, r in enumerate(results) if r[2]}
    return Refinement(pre=pre, post=post, unpruned=unpruned)
