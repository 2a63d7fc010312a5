"""Time Series Segments: split a component by the realized configuration of its parent set."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from causalcpd.utils.error_handler import ArtifactIOError, DataError

from .constants import SEGMENT_DUMP_INDEX
from .dataset import Dataset
from .export import read_json
from .types import Domain, LaggedParentSet

logger = logging.getLogger(__name__)


def config_weights(k: int, s: int) -> np.ndarray:
    """Odometer place values: the last parent varies fastest."""
    return s ** np.arange(k - 1, -1, -1, dtype=np.int64)


def config_index(codes: Sequence[int], s: int) -> int:
    return int(np.dot(np.asarray(codes, dtype=np.int64), config_weights(len(codes), s)))


@dataclass(frozen=True)
class ConfigMatrix:
    """All s^k parent configurations of ``parent_set``, row Λ in odometer order."""

    parent_set: LaggedParentSet
    s: int
    rows: np.ndarray

    @classmethod
    def build(cls, parent_set: LaggedParentSet, s: int) -> "ConfigMatrix":
        k = len(parent_set)
        rows = np.array(list(itertools.product(range(s), repeat=k)), dtype=np.int64).reshape(s**k, k)
        rows.setflags(write=False)
        return cls(parent_set=parent_set, s=s, rows=rows)

    def __len__(self) -> int:
        return self.rows.shape[0]

    def project(self, subset: LaggedParentSet) -> np.ndarray:
        """Row index in ``subset``'s own odometer for every row of this matrix."""
        positions = [self.parent_set.links.index(lk) for lk in subset.links]
        return self.rows[:, positions] @ config_weights(len(positions), self.s)


def configuration_indices(ds: Dataset, parents: LaggedParentSet, times: np.ndarray) -> np.ndarray:
    """Configuration index Λ of ``parents`` realized at each time in ``times``."""
    times = np.asarray(times, dtype=np.int64)
    index = np.zeros(len(times), dtype=np.int64)
    for weight, lk in zip(config_weights(len(parents), ds.s), parents.links):
        index += weight * ds.codes[lk.component, times - lk.lag]
    return index


@dataclass(frozen=True, eq=False)
class Segment:
    """
    X^j(Λ): the values of component j at the times whose parent configuration is row Λ.

    ``values[k] == ds.codes[component, time_indices[k]]``.
    """

    component: int
    config_index: int
    config: Tuple[int, ...]
    values: np.ndarray
    time_indices: np.ndarray

    @property
    def length(self) -> int:
        return int(len(self.values))

    @property
    def is_empty(self) -> bool:
        return self.length == 0

    @property
    def flag(self) -> Optional[str]:
        return "empty" if self.is_empty else None


def build_segments(
    ds: Dataset,
    spa: LaggedParentSet,
    component: int,
    tau_max_eff: Optional[int] = None,
) -> List[Segment]:
    """
    Partition X^component over [tau_max_eff, T) by the configuration of ``spa``.

    Returns all s^|spa| segments in Λ order; configurations that never occur
    give empty segments so Λ always indexes the configuration matrix.
    """
    if len(spa) == 0:
        raise ValueError(f"parent set of component {component} is empty; segments are undefined")
    start = spa.max_lag if tau_max_eff is None else tau_max_eff
    if start < spa.max_lag:
        raise ValueError(f"tau_max_eff={start} is below the parent set's max lag {spa.max_lag}")

    matrix = ConfigMatrix.build(spa, ds.s)
    times = np.arange(start, ds.T, dtype=np.int64)
    index = configuration_indices(ds, spa, times)
    series = ds.codes[component]

    # Stable sort keeps time order inside each configuration.
    order = np.argsort(index, kind="stable")
    bounds = np.searchsorted(index[order], np.arange(len(matrix) + 1))
    segments = []
    for lam in range(len(matrix)):
        t_lam = times[order[bounds[lam] : bounds[lam + 1]]]
        t_lam.setflags(write=False)
        values = series[t_lam]
        segments.append(
            Segment(
                component=component,
                config_index=lam,
                config=tuple(int(c) for c in matrix.rows[lam]),
                values=values,
                time_indices=t_lam,
            )
        )
    empty = sum(seg.is_empty for seg in segments)
    if empty:
        logger.debug(f"component {component}: {empty}/{len(segments)} segments are empty")
    return segments


def position_before(seg: Segment, t: int) -> int:
    """Number of the segment's samples taken strictly before time ``t``."""
    return int(np.searchsorted(seg.time_indices, t, side="left"))


def load_segment_dump(dump_dir: Union[str, Path]) -> Tuple[List[Segment], Dict[str, Any]]:
    """Read back a directory written by ``dump_segments``: the segments and the index document."""
    dump_dir = Path(dump_dir)
    index = read_json(dump_dir / SEGMENT_DUMP_INDEX)
    try:
        domain = Domain.of(index["domain"])
        entries = index["segments"]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{dump_dir / SEGMENT_DUMP_INDEX} is not a segment index: {e}") from e

    segments = []
    for entry in entries:
        try:
            frame = pd.read_csv(dump_dir / entry["file"])
        except OSError as e:
            raise ArtifactIOError(f"could not read segment file {entry['file']}: {e}") from e
        if list(frame.columns) != ["t", "value"]:
            raise DataError(f"{entry['file']}: expected columns (t, value), got {list(frame.columns)}")
        try:
            values = domain.encode(frame["value"].to_numpy())
        except ValueError as e:
            raise DataError(f"{entry['file']}: {e}") from e
        times = frame["t"].to_numpy(dtype=np.int64)
        if np.any(np.diff(times) <= 0):
            raise DataError(f"{entry['file']}: time stamps must be strictly increasing")
        segments.append(
            Segment(
                component=int(entry["component"]),
                config_index=int(entry["config_index"]),
                config=tuple(int(c) for c in entry["config"]),
                values=values,
                time_indices=times,
            )
        )
    logger.info(f"Loaded {len(segments)} segments from {dump_dir}")
    return segments, index
