"""
Synthetic Mechanism-Shift SCM: random specs with one change point per component, and their simulation.

A spec draws, for every component j, a union parent set SPA(X^j) that always
contains the self-lag (j, 1), a pre- and a post-change regime over subsets of
it, CPTs uniform on the simplex, and a change point inside the boundary
margin. CPTs are redrawn until at least one union configuration shows a
relative Pearson divergence above ``min_divergence`` between the regimes.
"""

from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from tenacity import Retrying, retry_if_result, stop_after_attempt

from causalcpd.utils.error_handler import InfeasibleSpecError

from .constants import (
    CPT_DISTRIBUTION,
    CPT_ROW_TOLERANCE,
    DEFAULT_MIN_DIVERGENCE,
    DIVERGENCE_ALPHA_BETA,
    REJECTION_BUDGET,
    SEGMENT_SAMPLE_FACTOR,
)
from .dataset import Dataset
from .rulsif import relative_pe
from .segments import ConfigMatrix, config_weights
from .types import ChangeKind, Domain, GeneratorSettings, LaggedParentSet, ParentGraph, link

logger = logging.getLogger(__name__)

SPEC_STREAM = 0
SIMULATION_STREAM = 1


def derive_seed(base: int, index: int) -> int:
    """Child seed ``index`` of ``base``; children of one base never share a stream."""
    state = np.random.SeedSequence(base, spawn_key=(index,)).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


class RegimeMechanism(BaseModel):
    """Parent set plus CPT: row Λ is the distribution of X^j_t given configuration Λ."""

    model_config = ConfigDict(frozen=True)

    parents: LaggedParentSet
    cpt: Tuple[Tuple[float, ...], ...]

    @model_validator(mode="after")
    def rows_are_distributions(self):
        if not self.cpt:
            raise ValueError("CPT has no rows")
        s = len(self.cpt[0])
        if s < 2 or any(len(row) != s for row in self.cpt):
            raise ValueError("CPT rows must share one length >= 2")
        expected = s ** len(self.parents)
        if len(self.cpt) != expected:
            raise ValueError(f"CPT has {len(self.cpt)} rows, expected s^|parents| = {expected}")
        table = np.asarray(self.cpt)
        if np.any(table < 0):
            raise ValueError("CPT entries must be nonnegative")
        worst = float(np.max(np.abs(table.sum(axis=1) - 1.0)))
        if worst > CPT_ROW_TOLERANCE:
            raise ValueError(f"CPT row sums deviate from 1 by {worst:.3g}")
        return self

    @property
    def s(self) -> int:
        return len(self.cpt[0])

    def table(self) -> np.ndarray:
        return np.asarray(self.cpt, dtype=float)


class RegimePair(BaseModel):
    model_config = ConfigDict(frozen=True)

    pre: RegimeMechanism
    post: RegimeMechanism

    @property
    def spa(self) -> LaggedParentSet:
        return self.pre.parents.union(self.post.parents)


class GroundTruth(BaseModel):
    """What a detector should recover: change points and the parent sets on each side."""

    model_config = ConfigDict(frozen=True)

    change_points: Tuple[int, ...]
    parents_pre: ParentGraph
    parents_post: ParentGraph
    change_kind: Tuple[ChangeKind, ...]

    @property
    def spa(self) -> ParentGraph:
        return self.parents_pre.union(self.parents_post)

    def to_json(self, names: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        names = list(names) if names is not None else [f"X{j + 1}" for j in range(len(self.change_points))]
        return {
            "change_points": list(self.change_points),
            "change_kind": [k.value for k in self.change_kind],
            "parents_pre": self.parents_pre.to_named(names),
            "parents_post": self.parents_post.to_named(names),
        }


class ScmSpec(BaseModel):
    """A complete Mechanism-Shift SCM: regimes, change points and the seed that simulates it."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    T: int = Field(..., ge=2)
    tau_max: int = Field(..., ge=1)
    domain: Domain
    change_points: Tuple[int, ...]
    regimes: Tuple[RegimePair, ...]
    change_kind: Tuple[ChangeKind, ...]
    seed: int = 0
    margin: int = Field(1, ge=1)
    min_divergence: float = Field(DEFAULT_MIN_DIVERGENCE, ge=0.0)
    cpt_distribution: str = CPT_DISTRIBUTION

    @field_validator("change_kind", mode="before")
    @classmethod
    def kinds_as_tuple(cls, v):
        if isinstance(v, (str, ChangeKind)):
            return (v,)
        return v

    @model_validator(mode="after")
    def consistent(self):
        for name in ("change_points", "regimes", "change_kind"):
            if len(getattr(self, name)) != self.n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries for n={self.n}")

        for j, cp in enumerate(self.change_points):
            if not self.tau_max < cp < self.T:
                raise ValueError(f"change point of component {j} ({cp}) must lie in ({self.tau_max}, {self.T})")
            if not self.margin <= cp <= self.T - self.margin:
                raise ValueError(
                    f"change point of component {j} ({cp}) violates the boundary margin "
                    f"[{self.margin}, {self.T - self.margin}]"
                )

        for j, (pair, kind) in enumerate(zip(self.regimes, self.change_kind)):
            for mech in (pair.pre, pair.post):
                if mech.s != self.domain.s:
                    raise ValueError(f"component {j}: CPT rows have {mech.s} entries, domain has {self.domain.s}")
                for lk in mech.parents.links:
                    if lk.component >= self.n or lk.lag > self.tau_max:
                        raise ValueError(f"component {j}: parent {lk.key} outside n={self.n}, tau_max={self.tau_max}")
            same_parents = pair.pre.parents == pair.post.parents
            if kind is ChangeKind.soft and not (same_parents and pair.pre.cpt != pair.post.cpt):
                raise ValueError(f"component {j}: a soft change keeps the parent set and changes the CPT")
            if kind is ChangeKind.hard and same_parents:
                raise ValueError(f"component {j}: a hard change needs different parent sets")
            if kind is ChangeKind.none and pair.pre != pair.post:
                raise ValueError(f"component {j}: kind 'none' needs identical regimes")
        return self

    @property
    def spa(self) -> ParentGraph:
        return ParentGraph(parents=tuple(pair.spa for pair in self.regimes))

    def ground_truth(self) -> GroundTruth:
        return GroundTruth(
            change_points=self.change_points,
            parents_pre=ParentGraph(parents=tuple(p.pre.parents for p in self.regimes)),
            parents_post=ParentGraph(parents=tuple(p.post.parents for p in self.regimes)),
            change_kind=self.change_kind,
        )

    def to_edge_array(self) -> np.ndarray:
        """
        Binary array of shape [n, 2, n, tau_max + 1].

        ``edge[j, r, i, lag] == 1`` when X^i_{t-lag} is a parent of X^j_t in
        regime r (0 before the change point, 1 after). Lag 0 is always empty.
        """
        edge = np.zeros((self.n, 2, self.n, self.tau_max + 1), dtype=np.int8)
        for j, pair in enumerate(self.regimes):
            for r, mech in enumerate((pair.pre, pair.post)):
                for lk in mech.parents.links:
                    edge[j, r, lk.component, lk.lag] = 1
        return edge

    @staticmethod
    def parents_from_edge_array(edge_array: Any) -> List[Tuple[LaggedParentSet, LaggedParentSet]]:
        edge = np.asarray(edge_array)
        if edge.ndim != 4 or edge.shape[1] != 2 or edge.shape[0] != edge.shape[2]:
            raise ValueError(f"edge array must have shape [n, 2, n, tau_max+1], got {edge.shape}")
        if np.any(edge[..., 0]):
            raise ValueError("edge array has instantaneous (lag 0) links")
        out = []
        for j in range(edge.shape[0]):
            sides = []
            for r in range(2):
                comps, lags = np.nonzero(edge[j, r])
                sides.append(LaggedParentSet.of(zip(comps.tolist(), lags.tolist())))
            out.append((sides[0], sides[1]))
        return out

    @classmethod
    def from_edge_array(
        cls,
        edge_array: Any,
        cpts: Sequence[Sequence[Sequence[Sequence[float]]]],
        **fields: Any,
    ) -> "ScmSpec":
        """Rebuild a spec from the array form; ``cpts[j]`` is ``[pre_rows, post_rows]``."""
        parents = cls.parents_from_edge_array(edge_array)
        edge = np.asarray(edge_array)
        if len(cpts) != len(parents):
            raise ValueError(f"{len(cpts)} CPT pairs for {len(parents)} components")
        regimes = tuple(
            RegimePair(
                pre=RegimeMechanism(parents=pre, cpt=tuple(tuple(row) for row in cpts[j][0])),
                post=RegimeMechanism(parents=post, cpt=tuple(tuple(row) for row in cpts[j][1])),
            )
            for j, (pre, post) in enumerate(parents)
        )
        fields.setdefault("n", edge.shape[0])
        fields.setdefault("tau_max", edge.shape[3] - 1)
        return cls(regimes=regimes, **fields)

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "T": self.T,
            "tau_max": self.tau_max,
            "domain": list(self.domain.symbols),
            "change_points": list(self.change_points),
            "change_kind": [k.value for k in self.change_kind],
            "seed": self.seed,
            "margin": self.margin,
            "min_divergence": self.min_divergence,
            "cpt_distribution": self.cpt_distribution,
            "edge_array": self.to_edge_array().tolist(),
            "cpts": [[list(map(list, p.pre.cpt)), list(map(list, p.post.cpt))] for p in self.regimes],
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "ScmSpec":
        fields = {k: v for k, v in doc.items() if k not in ("edge_array", "cpts", "domain")}
        fields["domain"] = Domain.of(doc["domain"])
        fields["change_points"] = tuple(doc["change_points"])
        fields["change_kind"] = tuple(ChangeKind(k) for k in doc["change_kind"])
        return cls.from_edge_array(doc["edge_array"], doc["cpts"], **fields)


# ---------------------------------------------------------------------------
# Random specs
# ---------------------------------------------------------------------------
def _draw_spa(rng: np.random.Generator, j: int, n: int, tau_max: int, spa_size: int) -> LaggedParentSet:
    candidates = [(i, lag) for i in range(n) for lag in range(1, tau_max + 1) if (i, lag) != (j, 1)]
    picked = rng.choice(len(candidates), size=spa_size - 1, replace=False) if spa_size > 1 else []
    return LaggedParentSet.of([(j, 1)] + [candidates[k] for k in picked])


def _split_hard(rng: np.random.Generator, spa: LaggedParentSet, j: int) -> Tuple[LaggedParentSet, LaggedParentSet]:
    """Each non-self link goes to the pre regime, the post regime or both; at least one not to both."""
    self_link = link(j, 1)
    others = [lk for lk in spa.links if lk != self_link]
    membership = rng.integers(0, 3, size=len(others))  # 0 pre only, 1 post only, 2 both
    if np.all(membership == 2):
        membership[rng.integers(0, len(others))] = rng.integers(0, 2)
    pre = [self_link] + [lk for lk, m in zip(others, membership) if m in (0, 2)]
    post = [self_link] + [lk for lk, m in zip(others, membership) if m in (1, 2)]
    return LaggedParentSet.from_links(pre), LaggedParentSet.from_links(post)


def _random_cpt(rng: np.random.Generator, k: int, s: int) -> Tuple[Tuple[float, ...], ...]:
    rows = rng.dirichlet(np.ones(s), size=s**k)
    # Renormalize so the stored rows meet the 1e-12 row-sum tolerance exactly.
    rows = rows / rows.sum(axis=1, keepdims=True)
    return tuple(tuple(float(v) for v in row) for row in rows)


def regime_divergence(pair: RegimePair, s: int, alpha_beta: float = DIVERGENCE_ALPHA_BETA) -> float:
    """Largest closed-form PE between the regimes over all configurations of the union parent set."""
    matrix = ConfigMatrix.build(pair.spa, s)
    p = pair.pre.table()[matrix.project(pair.pre.parents)]
    p_prime = pair.post.table()[matrix.project(pair.post.parents)]
    return float(np.max(relative_pe(p, p_prime, alpha_beta)))


def _draw_regimes(
    rng: np.random.Generator,
    j: int,
    n: int,
    tau_max: int,
    s: int,
    spa_size: int,
    kind: ChangeKind,
    min_divergence: float,
    max_attempts: int,
    alpha_beta: float,
) -> RegimePair:
    spa = _draw_spa(rng, j, n, tau_max, spa_size)
    if kind is ChangeKind.hard:
        pre_parents, post_parents = _split_hard(rng, spa, j)
    else:
        pre_parents = post_parents = spa

    if kind is ChangeKind.none:
        mech = RegimeMechanism(parents=spa, cpt=_random_cpt(rng, len(spa), s))
        return RegimePair(pre=mech, post=mech)

    best = {"divergence": -np.inf}

    def draw() -> Tuple[RegimePair, float]:
        pair = RegimePair(
            pre=RegimeMechanism(parents=pre_parents, cpt=_random_cpt(rng, len(pre_parents), s)),
            post=RegimeMechanism(parents=post_parents, cpt=_random_cpt(rng, len(post_parents), s)),
        )
        divergence = regime_divergence(pair, s, alpha_beta)
        best["divergence"] = max(best["divergence"], divergence)
        return pair, divergence

    retrying = Retrying(
        stop=stop_after_attempt(max_attempts),
        retry=retry_if_result(lambda outcome: min_divergence > 0 and outcome[1] <= min_divergence),
        retry_error_callback=lambda state: None,
    )
    outcome = retrying(draw)
    if outcome is None:
        raise InfeasibleSpecError(
            f"component {j}: no CPT pair with divergence > {min_divergence} after {max_attempts} draws "
            f"(best {best['divergence']:.4g})",
            best_divergence=best["divergence"],
        )
    pair, divergence = outcome
    logger.debug(
        f"component {j}: {kind.value} change, SPA={spa.describe()}, divergence={divergence:.4f} "
        f"after {retrying.statistics.get('attempt_number', 1)} draw(s)"
    )
    return pair


def random_spec(
    n: int,
    T: int,
    tau_max: int,
    domain: Optional[Domain] = None,
    spa_size: int = 1,
    change_kind: ChangeKind = ChangeKind.soft,
    margin: Optional[int] = None,
    min_divergence: float = DEFAULT_MIN_DIVERGENCE,
    seed: int = 0,
    change_points: Optional[Sequence[int]] = None,
    max_attempts: int = REJECTION_BUDGET,
    alpha_beta: float = DIVERGENCE_ALPHA_BETA,
) -> ScmSpec:
    """
    Draw a random Mechanism-Shift SCM.

    Every component gets |SPA| == ``spa_size`` with the self-lag always
    included. ``margin`` defaults to ``max(tau_max + 1, T // 4)`` so that the
    change point falls in the middle half of the series.

    Raises:
        InfeasibleSpecError: when ``spa_size`` cannot be met for this n,
            tau_max, domain and T, or the rejection budget runs out.
    """
    domain = domain or Domain.binary()
    change_kind = ChangeKind(change_kind)
    s = domain.s
    if spa_size < 1:
        raise InfeasibleSpecError(f"spa_size must be >= 1, got {spa_size}")
    if spa_size > n * tau_max:
        raise InfeasibleSpecError(f"spa_size={spa_size} exceeds the n*tau_max={n * tau_max} available links")
    if change_kind is ChangeKind.hard and spa_size < 2:
        raise InfeasibleSpecError("a hard change needs spa_size >= 2 so the parent sets can differ")
    needed = SEGMENT_SAMPLE_FACTOR * s**spa_size
    if T < needed:
        raise InfeasibleSpecError(
            f"T={T} is too short for spa_size={spa_size} on {s} symbols; need T >= {needed}"
        )
    margin = margin if margin is not None else max(tau_max + 1, T // 4)
    lo, hi = max(margin, tau_max + 1), min(T - margin, T - 1)
    if lo > hi:
        raise InfeasibleSpecError(f"no admissible change point: margin={margin} leaves [{lo}, {hi}] empty")

    rng = _stream(seed, SPEC_STREAM)
    regimes = tuple(
        _draw_regimes(rng, j, n, tau_max, s, spa_size, change_kind, min_divergence, max_attempts, alpha_beta)
        for j in range(n)
    )
    if change_points is None:
        change_points = tuple(int(c) for c in rng.integers(lo, hi + 1, size=n))
    try:
        spec = ScmSpec(
            n=n,
            T=T,
            tau_max=tau_max,
            domain=domain,
            change_points=tuple(int(c) for c in change_points),
            regimes=regimes,
            change_kind=tuple(change_kind for _ in range(n)),
            seed=seed,
            margin=margin,
            min_divergence=min_divergence,
        )
    except ValueError as e:
        raise InfeasibleSpecError(str(e)) from e
    logger.info(
        f"Drew {change_kind.value} spec: n={n}, T={T}, tau_max={tau_max}, |SPA|={spa_size}, "
        f"change points={list(spec.change_points)}"
    )
    return spec


def spec_from_settings(settings: GeneratorSettings, seed: int) -> ScmSpec:
    return random_spec(
        n=settings.n,
        T=settings.T,
        tau_max=settings.tau_max,
        domain=settings.domain,
        spa_size=settings.spa_size,
        change_kind=settings.change_kind,
        margin=settings.margin,
        min_divergence=settings.min_divergence,
        seed=seed,
        change_points=settings.change_points,
    )


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------
def _sampler(mech: RegimeMechanism, s: int):
    comps = np.array([lk.component for lk in mech.parents.links], dtype=np.int64)
    lags = np.array([lk.lag for lk in mech.parents.links], dtype=np.int64)
    return comps, lags, config_weights(len(comps), s), np.cumsum(mech.table(), axis=1)


def simulate(spec: ScmSpec) -> Tuple[Dataset, GroundTruth]:
    """
    Sample the series of ``spec``; deterministic in ``spec.seed``.

    The first ``tau_max`` columns are uniform over the domain. From there on
    X^j_t follows the pre-change CPT while t < T^j_c and the post-change CPT
    afterwards, given the realized parent values.
    """
    rng = _stream(spec.seed, SIMULATION_STREAM)
    n, T, s = spec.n, spec.T, spec.domain.s
    codes = np.empty((n, T), dtype=np.int64)
    codes[:, : spec.tau_max] = rng.integers(0, s, size=(n, spec.tau_max))
    uniforms = rng.random((T, n))

    samplers = [(_sampler(p.pre, s), _sampler(p.post, s)) for p in spec.regimes]
    for t in range(spec.tau_max, T):
        for j in range(n):
            comps, lags, weights, cdf = samplers[j][0 if t < spec.change_points[j] else 1]
            config = int(np.dot(weights, codes[comps, t - lags]))
            value = int(np.searchsorted(cdf[config], uniforms[t, j], side="right"))
            codes[j, t] = min(value, s - 1)

    logger.debug(f"Simulated n={n}, T={T} from seed {spec.seed}")
    return Dataset(codes=codes, domain=spec.domain), spec.ground_truth()
