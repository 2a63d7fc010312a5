"""Discrete multivariate time series: the core data model and its CSV I/O."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from causalcpd.utils.error_handler import ArtifactIOError, DataError

from .constants import SIDECAR_SUFFIX
from .export import atomic_write_text, read_json, write_json
from .types import Domain

logger = logging.getLogger(__name__)

TIME_COLUMN = "time"


def default_names(n: int) -> Tuple[str, ...]:
    return tuple(f"X{j + 1}" for j in range(n))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    n components x T time steps of symbol codes over a shared finite domain.

    ``codes[j, t]`` is the index of X^j_t's symbol in ``domain.symbols``; the
    array is read-only, so a Dataset can be shared freely between workers.
    """

    codes: np.ndarray
    domain: Domain
    component_names: Tuple[str, ...] = field(default=())
    time_labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.int64, copy=True)
        if codes.ndim != 2:
            raise DataError(f"dataset values must be a matrix, got shape {codes.shape}")
        n, T = codes.shape
        if n < 1:
            raise DataError("dataset needs at least one component")
        if T < 2:
            raise DataError(f"dataset needs at least two time steps, got {T}")
        if codes.min() < 0 or codes.max() >= self.domain.s:
            raise DataError(f"codes must lie in [0, {self.domain.s})")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

        names = tuple(self.component_names) or default_names(n)
        if len(names) != n:
            raise DataError(f"{len(names)} component names for {n} components")
        if len(set(names)) != n:
            raise DataError(f"component names must be unique: {list(names)}")
        object.__setattr__(self, "component_names", names)

        if self.time_labels is not None:
            labels = tuple(str(label) for label in self.time_labels)
            if len(labels) != T:
                raise DataError(f"{len(labels)} time labels for {T} time steps")
            object.__setattr__(self, "time_labels", labels)

    @classmethod
    def from_symbols(
        cls,
        values: np.ndarray,
        domain: Optional[Domain] = None,
        component_names: Sequence[str] = (),
        time_labels: Optional[Sequence[str]] = None,
    ) -> "Dataset":
        """Build from an n x T matrix of symbols; the domain is inferred when omitted."""
        values = np.asarray(values)
        if domain is None:
            symbols = np.unique(values)
            if len(symbols) < 2:
                raise DataError(f"domain size < 2: inferred domain {symbols.tolist()}")
            domain = Domain.of(symbols.tolist())
        try:
            codes = domain.encode(values)
        except ValueError as e:
            raise DataError(str(e)) from e
        return cls(
            codes=codes,
            domain=domain,
            component_names=tuple(component_names),
            time_labels=tuple(time_labels) if time_labels is not None else None,
        )

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def T(self) -> int:
        return self.codes.shape[1]

    @property
    def s(self) -> int:
        return self.domain.s

    @property
    def values(self) -> np.ndarray:
        """The symbol matrix (n x T)."""
        return self.domain.decode(self.codes)

    def component(self, j: int) -> np.ndarray:
        return self.codes[j]

    def index_of(self, name: str) -> int:
        try:
            return self.component_names.index(name)
        except ValueError as e:
            raise DataError(f"unknown component {name!r}") from e

    def label_at(self, t: int) -> Optional[str]:
        if self.time_labels is None or not 0 <= t < self.T:
            return None
        return self.time_labels[t]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.component_names == other.component_names
            and self.time_labels == other.time_labels
            and np.array_equal(self.codes, other.codes)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"Dataset(n={self.n}, T={self.T}, domain={list(self.domain.symbols)}, "
            f"components={list(self.component_names)})"
        )


class ColumnSchema(BaseModel):
    """How a CSV file maps onto a Dataset."""

    model_config = ConfigDict(frozen=True)

    header: bool = Field(True, description="First row holds column names")
    time_label_column: bool = Field(False, description="First column holds time labels")
    domain: Optional[Domain] = Field(None, description="Declared domain; inferred when None")
    components: Optional[Tuple[str, ...]] = Field(None, description="Component names overriding the header")
    threshold: Optional[float] = Field(
        None, description="Turn numeric readings into 0/1 indicators of value > threshold"
    )

    @classmethod
    def from_sidecar(cls, path: Union[str, Path]) -> "ColumnSchema":
        """Read the JSON sidecar: {"domain": [...], "components": [...], "time_labels": bool}."""
        doc = read_json(path)
        if not isinstance(doc, dict):
            raise DataError(f"sidecar {path} must hold a JSON object")
        try:
            return cls(
                header=bool(doc.get("header", True)),
                time_label_column=bool(doc.get("time_labels", False)),
                domain=Domain.of(doc["domain"]) if doc.get("domain") is not None else None,
                components=tuple(doc["components"]) if doc.get("components") else None,
                threshold=doc.get("threshold"),
            )
        except ValueError as e:
            raise DataError(f"invalid sidecar {path}: {e}") from e


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def _file_line(row: int, header: bool) -> int:
    return row + (2 if header else 1)


def _parse_cells(frame: pd.DataFrame, header: bool, threshold: Optional[float]) -> np.ndarray:
    """Strings to integers (or to indicators when a threshold is set), reporting the first bad cell."""
    missing = frame.isna().to_numpy()
    if missing.any():
        row, col = np.argwhere(missing)[0]
        raise DataError(
            f"ragged row at line {_file_line(row, header)}: expected {frame.shape[1]} fields, "
            f"column {frame.columns[col]!r} is missing"
        )
    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce")).to_numpy(dtype=float)
    bad = ~np.isfinite(numeric)
    if threshold is None:
        bad |= np.isfinite(numeric) & (np.floor(numeric) != numeric)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        kind = "a number" if threshold is not None else "an integer"
        raise DataError(
            f"parse failure at line {_file_line(row, header)}, column {frame.columns[col]!r}: "
            f"{frame.iat[row, col]!r} is not {kind}"
        )
    if threshold is not None:
        return (numeric > threshold).astype(np.int64)
    return numeric.astype(np.int64)


def load_csv(path: Union[str, Path], schema: Optional[ColumnSchema] = None) -> Dataset:
    """
    Read a CSV with one row per time step and one column per component.

    When ``schema`` is None the JSON sidecar written by :func:`save_csv` is
    used if present, otherwise a header row and an inferred domain are
    assumed.
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactIOError(f"no such file: {path}")
    if schema is None:
        sidecar = sidecar_path(path)
        schema = ColumnSchema.from_sidecar(sidecar) if sidecar.is_file() else ColumnSchema()
        if sidecar.is_file():
            logger.debug(f"Using sidecar {sidecar}")

    try:
        frame = pd.read_csv(
            path,
            header=0 if schema.header else None,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.ParserError as e:
        raise DataError(f"ragged or malformed CSV {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DataError(f"empty CSV {path}") from e
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not UTF-8: {e}") from e

    time_labels = None
    if schema.time_label_column:
        if frame.shape[1] < 2:
            raise DataError(f"{path}: a time-label column needs at least one data column")
        time_labels = tuple(frame.iloc[:, 0].astype(str))
        frame = frame.iloc[:, 1:]
    if frame.shape[1] < 1:
        raise DataError(f"{path} has no data columns")
    if frame.shape[0] < 2:
        raise DataError(f"{path} needs at least two time steps, got {frame.shape[0]}")

    raw = _parse_cells(frame, schema.header, schema.threshold)

    if schema.components is not None:
        names = tuple(schema.components)
        if len(names) != raw.shape[1]:
            raise DataError(f"{len(names)} declared components for {raw.shape[1]} columns in {path}")
    elif schema.header:
        names = tuple(str(c).strip() for c in frame.columns)
    else:
        names = default_names(raw.shape[1])

    domain = schema.domain
    if domain is None and schema.threshold is not None:
        domain = Domain.binary()
    if domain is not None:
        outside = ~np.isin(raw, np.asarray(domain.symbols))
        if outside.any():
            row, col = np.argwhere(outside)[0]
            raise DataError(
                f"domain violation at line {_file_line(row, schema.header)}, column {names[col]!r}: "
                f"value {raw[row, col]} outside declared domain {list(domain.symbols)}"
            )

    ds = Dataset.from_symbols(raw.T, domain=domain, component_names=names, time_labels=time_labels)
    logger.info(f"Loaded {path}: n={ds.n}, T={ds.T}, domain={list(ds.domain.symbols)}")
    return ds


def save_csv(ds: Dataset, path: Union[str, Path]) -> Path:
    """
    Write ``ds`` as CSV (time labels first when present) plus its JSON sidecar.

    ``load_csv(save_csv(ds, p)) == ds``.
    """
    if path is None or str(path).strip() == "":
        raise ArtifactIOError("empty output path")
    path = Path(path)
    frame = pd.DataFrame(ds.values.T, columns=list(ds.component_names))
    if ds.time_labels is not None:
        frame.insert(0, TIME_COLUMN, list(ds.time_labels))
    atomic_write_text(path, frame.to_csv(index=False))
    write_json(
        sidecar_path(path),
        {
            "domain": list(ds.domain.symbols),
            "components": list(ds.component_names),
            "time_labels": ds.time_labels is not None,
            "header": True,
        },
    )
    return path
