"""
G-test of conditional independence for lagged discrete variables.

X^i_{t-lag} and X^j_t are cross-tabulated within every stratum of the
conditioning set's realized configuration; per-stratum likelihood-ratio
statistics and degrees of freedom are summed and referred to a chi-square
upper tail.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from causalcpd.utils.error_handler import DataError

from .constants import DEFAULT_ALPHA_LEVEL, MIN_COUNT_FACTOR, MIN_EXPECTED_COUNT
from .dataset import Dataset
from .segments import configuration_indices
from .types import EMPTY_PARENTS, LaggedLink, LaggedParentSet

logger = logging.getLogger(__name__)


class CiQuery(BaseModel):
    """Is X^x.component_{t - x.lag} independent of X^y_t given ``cond``?"""

    model_config = ConfigDict(frozen=True)

    x: LaggedLink
    y: int = Field(..., ge=0, description="Target component, taken at lag 0")
    cond: LaggedParentSet = EMPTY_PARENTS
    alpha_level: float = Field(DEFAULT_ALPHA_LEVEL, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def x_not_conditioned_on(self):
        if self.x in self.cond:
            raise ValueError(f"{self.x.label()} is both tested and conditioned on")
        return self

    @property
    def max_lag(self) -> int:
        return max(self.x.lag, self.cond.max_lag)


class CiVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    independent: bool
    p_value: float = Field(..., ge=0.0, le=1.0)
    statistic: float = Field(..., ge=0.0)
    dof: int = Field(..., ge=0)
    effective_samples: int
    strata: int = 0
    forced_dependent: bool = False


def g_statistic(table: np.ndarray) -> Tuple[float, int]:
    """
    G = 2 sum O ln(O / E) for one two-way table, with dof over its nonzero margins.

    A table whose rows or columns collapse to a single nonzero margin has
    dof 0 and statistic 0.
    """
    table = np.asarray(table, dtype=float)
    total = table.sum()
    rows, cols = table.sum(axis=1), table.sum(axis=0)
    dof = (int(np.count_nonzero(rows)) - 1) * (int(np.count_nonzero(cols)) - 1)
    if total == 0 or dof <= 0:
        return 0.0, 0
    expected = np.outer(rows, cols) / total
    observed = table > 0
    g = 2.0 * float(np.sum(table[observed] * np.log(table[observed] / expected[observed])))
    return max(g, 0.0), dof


def _sample_times(ds: Dataset, q: CiQuery, t_range: Optional[Tuple[int, int]]) -> np.ndarray:
    t_lo, t_hi = t_range if t_range is not None else (0, ds.T)
    t_lo = max(int(t_lo), q.max_lag)
    t_hi = min(int(t_hi), ds.T)
    if t_lo >= t_hi:
        raise DataError(f"empty sample range [{t_lo}, {t_hi}) for {q.x.label()} -> X{q.y + 1}")
    return np.arange(t_lo, t_hi, dtype=np.int64)


def g_test(ds: Dataset, q: CiQuery, t_range: Optional[Tuple[int, int]] = None) -> CiVerdict:
    """
    Test X ⫫ Y | cond on the target times in ``t_range`` (half-open, 0-based).

    Times whose lags would reach before column 0 are dropped. Strata whose mean
    expected cell count is below 5 contribute neither statistic nor dof. When
    fewer than ``5 * s^2`` samples per nonempty stratum remain on average the
    verdict is forced to dependent, so the edge is kept.
    """
    times = _sample_times(ds, q, t_range)
    s = ds.s
    x = ds.codes[q.x.component, times - q.x.lag]
    y = ds.codes[q.y, times]
    z = configuration_indices(ds, q.cond, times)
    _, stratum = np.unique(z, return_inverse=True)
    n_strata = int(stratum.max()) + 1
    counts = np.bincount(stratum * s * s + x * s + y, minlength=n_strata * s * s).reshape(n_strata, s, s)

    stat, dof, effective = 0.0, 0, 0
    for table in counts:
        n_z = int(table.sum())
        if n_z / (s * s) < MIN_EXPECTED_COUNT:
            continue
        g, d = g_statistic(table)
        stat += g
        dof += d
        effective += n_z

    if effective < MIN_COUNT_FACTOR * s * s * n_strata:
        logger.debug(
            f"g_test {q.x.label()} -> X{q.y + 1} | {q.cond.describe()}: {effective} usable samples "
            f"over {n_strata} strata, keeping as dependent"
        )
        return CiVerdict(
            independent=False,
            p_value=0.0,
            statistic=stat,
            dof=dof,
            effective_samples=effective,
            strata=n_strata,
            forced_dependent=True,
        )
    if dof == 0:
        return CiVerdict(
            independent=True, p_value=1.0, statistic=0.0, dof=0, effective_samples=effective, strata=n_strata
        )

    p_value = float(min(max(stats.chi2.sf(stat, dof), 0.0), 1.0))
    return CiVerdict(
        independent=p_value > q.alpha_level,
        p_value=p_value,
        statistic=stat,
        dof=dof,
        effective_samples=effective,
        strata=n_strata,
    )
