"""Sample container, CSV ingestion and covariate rescaling."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates ``X`` (n x m), responses ``Y`` and optional 0/1 indicators.

    Responses with ``delta == 0`` are unobserved; their stored value is
    never read by any estimator (it is zeroed on construction).
    """

    X: np.ndarray
    Y: np.ndarray
    delta: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        Y = np.asarray(self.Y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("X must be a non-empty n x m array")
        if Y.shape[0] != X.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        delta = self.delta
        if delta is not None:
            delta = np.asarray(delta).ravel()
            if delta.shape[0] != X.shape[0]:
                raise DataError(f"delta has {delta.shape[0]} entries, expected {X.shape[0]}")
            if not np.all((delta == 0) | (delta == 1)):
                raise DataError("delta must contain only 0 and 1")
            delta = delta.astype(np.int8)
            Y = np.where(delta == 1, Y, 0.0)
        for arr in (X, Y) + ((delta,) if delta is not None else ()):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "delta", delta)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def observed(self) -> np.ndarray:
        """Boolean mask of rows whose response is observed."""
        if self.delta is None:
            return np.ones(self.n, dtype=bool)
        return self.delta == 1

    @property
    def has_missing(self) -> bool:
        return self.delta is not None and bool(np.any(self.delta == 0))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.delta is None) != (other.delta is None):
            return False
        same = np.array_equal(self.X, other.X) and np.array_equal(self.Y, other.Y)
        if self.delta is not None:
            same = same and np.array_equal(self.delta, other.delta)
        return same

    __hash__ = None


@dataclass(frozen=True)
class CsvSchema:
    x: tuple[str, ...]
    y: str
    delta: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))


@dataclass(frozen=True)
class RescaleMap:
    """Per-dimension affine map sending ``[lo_k, hi_k]`` onto ``[0, 1]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        for k, (a, b) in enumerate(zip(self.lo, self.hi)):
            if not a < b:
                raise DataError(f"rescale map needs lo < hi in dimension {k}")

    def apply(self, X: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return (np.asarray(X, dtype=float) - lo) / (hi - lo)

    def invert(self, U: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + np.asarray(U, dtype=float) * (hi - lo)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {column}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {column}: value {text!r} is not finite")
    return value


def _read_rows(source: TextIO | str) -> tuple[list[str], list[list[str]]]:
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = None
    rows = []
    for record in reader:
        if not record or all(not cell.strip() for cell in record):
            continue
        if header is None:
            header = [cell.strip() for cell in record]
        else:
            rows.append(record)
    if header is None or not rows:
        raise DataError("empty file: need a header row and at least one data row")
    return header, rows


def _column_index(header: list[str], name: str) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise DataError(f"column {name!r} not found; available: {', '.join(header)}") from None


def read_column(source: TextIO | str, name: str) -> np.ndarray:
    """Read one numeric column by name (used for user-supplied detection values)."""
    header, rows = _read_rows(source)
    k = _column_index(header, name)
    values = []
    for i, record in enumerate(rows, start=1):
        if k >= len(record):
            raise DataError(f"row {i}, column {name}: missing value")
        values.append(_parse_float(record[k].strip(), i, name))
    return np.array(values)


def ingest_csv(source: TextIO | str, schema: CsvSchema) -> Dataset:
    """Parse a comma-separated table with a header row into a :class:`Dataset`.

    Rows are numbered from 1 (the first data row) in error messages.
    """
    header, rows = _read_rows(source)
    x_idx = [_column_index(header, name) for name in schema.x]
    y_idx = _column_index(header, schema.y)
    d_idx = _column_index(header, schema.delta) if schema.delta is not None else None

    X = np.empty((len(rows), len(x_idx)))
    Y = np.empty(len(rows))
    delta = np.empty(len(rows), dtype=np.int8) if d_idx is not None else None
    for i, record in enumerate(rows, start=1):
        cells = [cell.strip() for cell in record]
        if len(cells) < len(header):
            raise DataError(f"row {i}: expected {len(header)} fields, found {len(cells)}")
        if d_idx is not None:
            flag = cells[d_idx]
            if flag not in ("0", "1", "0.0", "1.0"):
                raise DataError(f"row {i}, column {schema.delta}: indicator must be 0 or 1, got {flag!r}")
            delta[i - 1] = int(float(flag))
        for j, k in enumerate(x_idx):
            X[i - 1, j] = _parse_float(cells[k], i, schema.x[j])
        if delta is not None and delta[i - 1] == 0 and cells[y_idx] in ("", "NA", "nan", "NaN"):
            Y[i - 1] = 0.0
        else:
            Y[i - 1] = _parse_float(cells[y_idx], i, schema.y)
    return Dataset(X, Y, delta)


def to_csv(dataset: Dataset, schema: CsvSchema) -> str:
    """Serialise ``dataset`` using the column names in ``schema``."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = list(schema.x) + [schema.y]
    if dataset.delta is not None:
        if schema.delta is None:
            raise DataError("schema has no indicator column for a dataset with delta")
        header.append(schema.delta)
    writer.writerow(header)
    for j in range(dataset.n):
        row = [repr(float(v)) for v in dataset.X[j]] + [repr(float(dataset.Y[j]))]
        if dataset.delta is not None:
            row.append(str(int(dataset.delta[j])))
        writer.writerow(row)
    return out.getvalue()


def fit_rescale(X: np.ndarray) -> RescaleMap:
    X = np.asarray(X, dtype=float)
    lo, hi = X.min(axis=0), X.max(axis=0)
    for k in range(X.shape[1]):
        if not hi[k] > lo[k]:
            raise DataError(f"constant covariate in column {k}: cannot rescale")
    return RescaleMap(tuple(map(float, lo)), tuple(map(float, hi)))


def rescale_to_unit_cube(d: Dataset) -> tuple[Dataset, RescaleMap]:
    """Map every covariate onto [0, 1] using its observed min and max."""
    rmap = fit_rescale(d.X)
    U = rmap.apply(d.X)
    # pin the extremes so rounding cannot push them off the cube
    U = np.clip(U, 0.0, 1.0)
    return Dataset(U, d.Y, d.delta), rmap


def complete_cases(d: Dataset) -> Dataset:
    if d.delta is None:
        raise DataError("complete_cases requires missingness indicators")
    keep = d.delta == 1
    if not keep.any():
        raise DataError("no complete cases")
    if keep.all():
        return Dataset(d.X, d.Y)
    return Dataset(d.X[keep], d.Y[keep])

