"""Shared domain models: symbols, lagged parent sets, graphs and run configurations."""

from __future__ import annotations

from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .constants import (
    CV_FOLDS,
    CV_RIDGES,
    CV_SIGMA_FACTORS,
    DEFAULT_ALPHA,
    DEFAULT_ALPHA_LEVEL,
    DEFAULT_MAX_CENTERS,
    DEFAULT_MAX_COMBINATIONS,
    DEFAULT_MIN_DIVERGENCE,
    DEFAULT_N_INTERVALS,
    DEFAULT_NST,
    DEFAULT_NW,
    DEFAULT_PC_MAX_CONDS,
    DEFAULT_RIDGE,
    DEFAULT_TAU_UB,
    MIN_SAMPLES_FACTOR,
    SIGMA_FLOOR,
)


class ChangeKind(str, Enum):
    """
    How a component's mechanism changes at its change point.

    ``soft``: same parent set, different CPTs. ``hard``: different parent
    sets. Some write-ups swap the two words; the parent-set criterion is the
    one used here. ``none`` keeps the mechanism identical (stationary data).
    """

    soft = "soft"
    hard = "hard"
    none = "none"


class Estimator(str, Enum):
    plugin = "plugin"
    kernel = "kernel"


class Domain(BaseModel):
    """Finite ordered symbol set shared by every component."""

    model_config = ConfigDict(frozen=True)

    symbols: Tuple[int, ...] = Field(..., description="Distinct symbols, strictly increasing")

    @field_validator("symbols")
    @classmethod
    def symbols_strictly_increasing(cls, v):
        if len(v) < 2:
            raise ValueError(f"domain size < 2: {list(v)}")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"domain symbols must be strictly increasing: {list(v)}")
        return v

    @classmethod
    def of(cls, symbols: Iterable[int]) -> "Domain":
        return cls(symbols=tuple(int(s) for s in symbols))

    @classmethod
    def binary(cls) -> "Domain":
        return cls(symbols=(0, 1))

    @property
    def s(self) -> int:
        return len(self.symbols)

    def encode(self, values: np.ndarray) -> np.ndarray:
        """Symbols to codes 0..s-1. Raises ValueError on a value outside the domain."""
        values = np.asarray(values)
        table = np.asarray(self.symbols)
        codes = np.searchsorted(table, values)
        codes = np.clip(codes, 0, self.s - 1)
        bad = table[codes] != values
        if np.any(bad):
            first = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValueError(
                f"value {values[first]} at {first} outside domain {list(self.symbols)}"
            )
        return codes.astype(np.int64)

    def decode(self, codes: np.ndarray) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)[np.asarray(codes)]


class LaggedLink(BaseModel):
    """Directed lagged link X^component_{t-lag} -> target."""

    model_config = ConfigDict(frozen=True)

    component: int = Field(..., ge=0, description="Parent component index")
    lag: int = Field(..., ge=1, description="Time lag, causal links always point from the past")

    @property
    def key(self) -> Tuple[int, int]:
        return (self.component, self.lag)

    def shifted(self, by: int) -> "LaggedLink":
        return LaggedLink(component=self.component, lag=self.lag + by)

    def label(self, names: Optional[Sequence[str]] = None) -> str:
        name = names[self.component] if names else f"X{self.component + 1}"
        return f"{name}(t-{self.lag})"


def link(component: int, lag: int) -> LaggedLink:
    return LaggedLink(component=component, lag=lag)


class LaggedParentSet(BaseModel):
    """Deduplicated parent set, ordered by (component, lag)."""

    model_config = ConfigDict(frozen=True)

    links: Tuple[LaggedLink, ...] = Field(default=(), description="Links sorted by (component, lag)")

    @field_validator("links")
    @classmethod
    def sorted_unique(cls, v):
        return tuple(sorted(set(v), key=lambda lk: lk.key))

    @classmethod
    def of(cls, pairs: Iterable[Tuple[int, int]]) -> "LaggedParentSet":
        return cls(links=tuple(link(c, lag) for c, lag in pairs))

    @classmethod
    def from_links(cls, links: Iterable[LaggedLink]) -> "LaggedParentSet":
        return cls(links=tuple(links))

    def __len__(self) -> int:
        return len(self.links)

    def __contains__(self, item: object) -> bool:
        return item in self.links

    @property
    def max_lag(self) -> int:
        return max((lk.lag for lk in self.links), default=0)

    def pairs(self) -> List[Tuple[int, int]]:
        return [lk.key for lk in self.links]

    def union(self, other: "LaggedParentSet") -> "LaggedParentSet":
        return LaggedParentSet(links=self.links + other.links)

    def difference(self, other: "LaggedParentSet") -> "LaggedParentSet":
        return LaggedParentSet(links=tuple(lk for lk in self.links if lk not in other.links))

    def without(self, item: LaggedLink) -> "LaggedParentSet":
        return LaggedParentSet(links=tuple(lk for lk in self.links if lk != item))

    def shifted(self, by: int) -> "LaggedParentSet":
        return LaggedParentSet(links=tuple(lk.shifted(by) for lk in self.links))

    def issubset(self, other: "LaggedParentSet") -> bool:
        return set(self.links) <= set(other.links)

    def to_named(self, names: Sequence[str]) -> List[List]:
        return [[names[lk.component], lk.lag] for lk in self.links]

    @classmethod
    def from_named(cls, pairs: Iterable[Sequence], names: Sequence[str]) -> "LaggedParentSet":
        index = {name: i for i, name in enumerate(names)}
        try:
            return cls.of((index[str(name)], int(lag)) for name, lag in pairs)
        except KeyError as e:
            raise ValueError(f"unknown component {e.args[0]!r}; expected one of {list(names)}") from e

    def describe(self, names: Optional[Sequence[str]] = None) -> str:
        return "{" + ", ".join(lk.label(names) for lk in self.links) + "}"


EMPTY_PARENTS = LaggedParentSet()


class ParentGraph(BaseModel):
    """Per-component lagged parent sets (time-translation-invariant summary graph)."""

    model_config = ConfigDict(frozen=True)

    parents: Tuple[LaggedParentSet, ...] = Field(..., description="Parent set of each component")

    @classmethod
    def empty(cls, n: int) -> "ParentGraph":
        return cls(parents=tuple(EMPTY_PARENTS for _ in range(n)))

    @property
    def n(self) -> int:
        return len(self.parents)

    def __getitem__(self, j: int) -> LaggedParentSet:
        return self.parents[j]

    @property
    def max_lag(self) -> int:
        return max((p.max_lag for p in self.parents), default=0)

    def union(self, other: "ParentGraph") -> "ParentGraph":
        if other.n != self.n:
            raise ValueError(f"graph sizes differ: {self.n} vs {other.n}")
        return ParentGraph(parents=tuple(a.union(b) for a, b in zip(self.parents, other.parents)))

    def is_subgraph_of(self, other: "ParentGraph") -> bool:
        return other.n == self.n and all(a.issubset(b) for a, b in zip(self.parents, other.parents))

    def replace(self, j: int, parents: LaggedParentSet) -> "ParentGraph":
        updated = list(self.parents)
        updated[j] = parents
        return ParentGraph(parents=tuple(updated))

    def to_named(self, names: Sequence[str]) -> Dict[str, List[List]]:
        return {names[j]: p.to_named(names) for j, p in enumerate(self.parents)}

    @classmethod
    def from_named(cls, mapping: Dict[str, Iterable[Sequence]], names: Sequence[str]) -> "ParentGraph":
        missing = [name for name in names if name not in mapping]
        if missing:
            raise ValueError(f"parent graph lacks components {missing}")
        return cls(parents=tuple(LaggedParentSet.from_named(mapping[name], names) for name in names))


class DiscoveryConfig(BaseModel):
    """Parameters of superset-parent discovery."""

    model_config = ConfigDict(frozen=True)

    tau_ub: int = Field(DEFAULT_TAU_UB, ge=1, description="Maximum lag scanned")
    alpha_level: float = Field(DEFAULT_ALPHA_LEVEL, gt=0.0, lt=1.0, description="CI-test significance level")
    n_intervals: int = Field(DEFAULT_N_INTERVALS, ge=1, description="Consecutive intervals whose edges are united")
    pc_max_conds: int = Field(DEFAULT_PC_MAX_CONDS, ge=0, description="Cap on conditioning-set size in selection")
    max_combinations: int = Field(DEFAULT_MAX_COMBINATIONS, ge=1, description="Conditioning sets tried per size")
    max_conds_px: Optional[int] = Field(None, ge=0, description="Cap on shifted parents of the cause in MCI tests")
    min_samples_factor: int = Field(MIN_SAMPLES_FACTOR, ge=1, description="Per-interval minimum is factor * s^(pc_max_conds+2)")

    def min_interval_samples(self, s: int) -> int:
        return self.min_samples_factor * s ** (self.pc_max_conds + 2)


class KernelParams(BaseModel):
    """Free parameters of the Gaussian-kernel density-ratio model."""

    model_config = ConfigDict(frozen=True)

    sigma: Optional[float] = Field(None, gt=0.0, description="Kernel width; None selects the median heuristic")
    sigma_floor: float = Field(SIGMA_FLOOR, gt=0.0, description="Lower bound for the median-heuristic width")
    ridge: float = Field(DEFAULT_RIDGE, gt=0.0, description="Ridge regularization lambda")
    max_centers: int = Field(DEFAULT_MAX_CENTERS, ge=1, description="Kernel centers taken from the first half")
    cross_validate: bool = Field(False, description="Select sigma and lambda on a grid by k-fold CV")
    cv_folds: int = Field(CV_FOLDS, ge=2)
    cv_sigma_factors: Tuple[float, ...] = Field(CV_SIGMA_FACTORS, description="Grid of multiples of the median width")
    cv_ridges: Tuple[float, ...] = Field(CV_RIDGES)


class PeParams(BaseModel):
    """Sliding-window relative Pearson divergence parameters."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0, description="Relative (mixing) parameter")
    n_w: int = Field(DEFAULT_NW, ge=2, description="Samples per half window")
    n_st: int = Field(DEFAULT_NST, ge=1, description="Window stride")
    estimator: Estimator = Field(Estimator.plugin)
    kernel: KernelParams = Field(default_factory=KernelParams)


class DetectorConfig(BaseModel):
    """Full parameter set of the change point detector."""

    model_config = ConfigDict(frozen=True)

    discovery: DiscoveryConfig = Field(default_factory=DiscoveryConfig)
    pe: PeParams = Field(default_factory=PeParams)
    min_segment_length: Optional[int] = Field(None, description="Segments shorter than this are skipped; default 2*n_w+1")
    refine: bool = Field(False, description="Prune parent sets before and after the projected change point")
    score_threshold: Optional[float] = Field(None, ge=0.0, description="Peak score below which no change is reported")

    @model_validator(mode="after")
    def min_length_covers_a_window(self):
        floor = 2 * self.pe.n_w + 1
        if self.min_segment_length is not None and self.min_segment_length < floor:
            raise ValueError(f"min_segment_length must be >= 2*n_w+1 = {floor}")
        return self

    @property
    def effective_min_segment_length(self) -> int:
        if self.min_segment_length is None:
            return 2 * self.pe.n_w + 1
        return self.min_segment_length


class GeneratorSettings(BaseModel):
    """Arguments of the synthetic Mechanism-Shift SCM generator."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(3, ge=1)
    T: int = Field(6000, ge=2)
    tau_max: int = Field(4, ge=1)
    domain: Domain = Field(default_factory=Domain.binary)
    spa_size: int = Field(3, ge=1)
    change_kind: ChangeKind = Field(ChangeKind.soft)
    margin: Optional[int] = Field(None, ge=1, description="Boundary separation; None uses T // 4")
    min_divergence: float = Field(DEFAULT_MIN_DIVERGENCE, ge=0.0)
    change_points: Optional[Tuple[int, ...]] = Field(None, description="Pin change points instead of drawing them")
