"""Immutable tabular data model: schemas, datasets, CSV I/O, encoding, Gower.

Continuous values are 64-bit floats; categorical values are stored as integer
indices into the column's ordered category list. Datasets are immutable after
construction and safe to share across concurrent pipeline nodes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CellTypeError,
    HeaderMismatch,
    MissingValue,
    SchemaError,
    UnknownCategory,
)

CONTINUOUS_FMT = ".17g"  # 17 significant digits: bit-exact float64 round trip


class ColumnKind(str, Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: ColumnKind
    categories: tuple[str, ...] | None = None
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if self.kind is ColumnKind.CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"column {self.name!r}: categorical needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r}: duplicate categories")
            if self.bounds is not None:
                raise SchemaError(f"column {self.name!r}: bounds only apply to continuous")
        else:
            if self.categories is not None:
                raise SchemaError(f"column {self.name!r}: categories only apply to categorical")
            if self.bounds is not None and not self.bounds[0] <= self.bounds[1]:
                raise SchemaError(f"column {self.name!r}: bounds min must be <= max")


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        if not self.columns:
            raise SchemaError("schema needs at least one column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be distinct")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"no column named {name!r}")

    def column(self, name: str) -> ColumnSpec:
        return self.columns[self.index_of(name)]

    def restrict(self, names: Sequence[str]) -> "Schema":
        """Sub-schema with the given columns, kept in this schema's order."""
        wanted = set(names)
        cols = tuple(c for c in self.columns if c.name in wanted)
        if len(cols) != len(wanted):
            missing = wanted - {c.name for c in cols}
            raise SchemaError(f"unknown columns: {sorted(missing)}")
        return Schema(cols)

    def same_structure(self, other: "Schema") -> bool:
        """Equality on names, order, kinds, and categories (bounds ignored)."""
        if len(self.columns) != len(other.columns):
            return False
        return all(
            a.name == b.name and a.kind == b.kind and a.categories == b.categories
            for a, b in zip(self.columns, other.columns)
        )


def schema_to_json_obj(schema: Schema) -> dict:
    cols = []
    for c in schema.columns:
        obj: dict[str, Any] = {"name": c.name, "kind": c.kind.value}
        if c.categories is not None:
            obj["categories"] = list(c.categories)
        if c.bounds is not None:
            obj["bounds"] = [c.bounds[0], c.bounds[1]]
        cols.append(obj)
    return {"columns": cols}


def schema_from_json_obj(obj: Any) -> Schema:
    if not isinstance(obj, dict) or set(obj) != {"columns"}:
        raise SchemaError('schema document must be {"columns": [...]}')
    cols = []
    for i, c in enumerate(obj["columns"]):
        if not isinstance(c, dict):
            raise SchemaError(f"columns[{i}] must be an object")
        extra = set(c) - {"name", "kind", "categories", "bounds"}
        if extra:
            raise SchemaError(f"columns[{i}]: unknown fields {sorted(extra)}")
        try:
            kind = ColumnKind(c.get("kind"))
        except ValueError:
            raise SchemaError(f"columns[{i}]: kind must be continuous|categorical") from None
        cats = c.get("categories")
        bounds = c.get("bounds")
        cols.append(
            ColumnSpec(
                name=c.get("name", ""),
                kind=kind,
                categories=tuple(cats) if cats is not None else None,
                bounds=(float(bounds[0]), float(bounds[1])) if bounds is not None else None,
            )
        )
    return Schema(tuple(cols))


def read_schema(path) -> Schema:
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_json_obj(json.load(fh))


@dataclass(frozen=True)
class Dataset:
    """Immutable typed table: one numpy array per schema column.

    Continuous columns are float64, categorical columns are int64 indices into
    the column's categories.
    """

    schema: Schema
    columns: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.columns) != len(self.schema.columns):
            raise SchemaError("column count does not match schema")
        n = None
        frozen = []
        for spec, arr in zip(self.schema.columns, self.columns):
            if spec.kind is ColumnKind.CONTINUOUS:
                arr = np.asarray(arr, dtype=np.float64)
                if arr.size and not np.all(np.isfinite(arr)):
                    raise SchemaError(f"column {spec.name!r}: non-finite values")
            else:
                arr = np.asarray(arr, dtype=np.int64)
                if arr.size and (arr.min() < 0 or arr.max() >= len(spec.categories)):
                    raise SchemaError(f"column {spec.name!r}: category index out of range")
            if arr.ndim != 1:
                raise SchemaError(f"column {spec.name!r}: arrays must be 1-d")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise SchemaError("all columns must have equal length")
            arr = arr.copy()
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "columns", tuple(frozen))

    @property
    def n(self) -> int:
        return int(self.columns[0].shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.schema.index_of(name)]

    def row(self, i: int) -> tuple:
        """Raw row values: floats for continuous, category indices for categorical."""
        return tuple(
            float(arr[i]) if spec.kind is ColumnKind.CONTINUOUS else int(arr[i])
            for spec, arr in zip(self.schema.columns, self.columns)
        )

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.schema, tuple(arr[idx] for arr in self.columns))

    def restrict(self, names: Sequence[str]) -> "Dataset":
        sub = self.schema.restrict(names)
        return Dataset(sub, tuple(self.column(c.name) for c in sub.columns))

    def equals(self, other: "Dataset") -> bool:
        if self.schema != other.schema or self.n != other.n:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.columns, other.columns))


def make_dataset(schema: Schema, values: Mapping[str, Sequence]) -> Dataset:
    """Build a Dataset from per-column values; categorical cells may be labels."""
    if set(values) != set(schema.names):
        raise SchemaError("values must cover exactly the schema columns")
    cols = []
    for spec in schema.columns:
        raw = values[spec.name]
        if spec.kind is ColumnKind.CATEGORICAL and len(raw) and isinstance(raw[0], str):
            lookup = {lab: i for i, lab in enumerate(spec.categories)}
            try:
                raw = [lookup[v] for v in raw]
            except KeyError as e:
                raise SchemaError(f"column {spec.name!r}: unknown label {e.args[0]!r}") from None
        cols.append(np.asarray(raw))
    return Dataset(schema, tuple(cols))


def concat_datasets(a: Dataset, b: Dataset) -> Dataset:
    if not a.schema.same_structure(b.schema):
        raise SchemaError("cannot concatenate datasets with different structure")
    return Dataset(
        a.schema,
        tuple(np.concatenate([x, y]) for x, y in zip(a.columns, b.columns)),
    )


# ------------------------------------------------------------------ CSV I/O ---

def load_csv(path, schema: Schema, missing_policy: str = "error") -> Dataset:
    """Read a typed CSV. Header must match the schema names exactly, in order.

    missing_policy: "drop_row" silently drops rows with any empty cell;
    "error" raises MissingValue at the first one.
    """
    if missing_policy not in ("drop_row", "error"):
        raise ValueError(f"unknown missing_policy {missing_policy!r}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch("file is empty, header row required") from None
        if tuple(header) != schema.names:
            raise HeaderMismatch(
                f"header {header!r} does not match schema columns {list(schema.names)!r}"
            )
        cat_lookup = [
            {lab: i for i, lab in enumerate(c.categories)} if c.categories else None
            for c in schema.columns
        ]
        out: list[list] = [[] for _ in schema.columns]
        for rownum, record in enumerate(reader, start=1):
            if len(record) != len(schema.columns):
                raise CellTypeError(
                    rownum, None, f"expected {len(schema.columns)} fields, got {len(record)}"
                )
            if any(cell == "" for cell in record):
                if missing_policy == "drop_row":
                    continue
                col = schema.columns[[c == "" for c in record].index(True)].name
                raise MissingValue(rownum, col)
            for j, (spec, cell) in enumerate(zip(schema.columns, record)):
                if spec.kind is ColumnKind.CONTINUOUS:
                    try:
                        v = float(cell)
                    except ValueError:
                        raise CellTypeError(rownum, spec.name, f"not a number: {cell!r}") from None
                    if not math.isfinite(v):
                        raise CellTypeError(rownum, spec.name, f"non-finite value: {cell!r}")
                    out[j].append(v)
                else:
                    idx = cat_lookup[j].get(cell)  # type: ignore[union-attr]
                    if idx is None:
                        raise UnknownCategory(rownum, spec.name, cell)
                    out[j].append(idx)
    return Dataset(schema, tuple(np.asarray(col) for col in out))


def dataset_to_csv_bytes(ds: Dataset) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ds.schema.names)
    cells = []
    for spec, arr in zip(ds.schema.columns, ds.columns):
        if spec.kind is ColumnKind.CONTINUOUS:
            cells.append([format(v, CONTINUOUS_FMT) for v in arr])
        else:
            cats = spec.categories
            cells.append([cats[i] for i in arr])
    for row in zip(*cells) if cells else []:
        writer.writerow(row)
    if ds.n == 0:
        pass  # header-only file
    return buf.getvalue().encode("utf-8")


def write_csv(ds: Dataset, path) -> None:
    data = dataset_to_csv_bytes(ds)
    with open(path, "wb") as fh:
        fh.write(data)


# ----------------------------------------------------------------- encoding ---

@dataclass(frozen=True)
class EncodedMatrix:
    """One-hot (first level dropped) + standardized-continuous design matrix."""

    rows: int
    cols: int
    data: np.ndarray
    column_map: tuple[tuple[str, str], ...]  # (source column, category or "scaled-continuous")
    degenerate_columns: tuple[str, ...]  # zero-variance continuous, emitted as zeros


def encoded_width(schema: Schema) -> int:
    k = 0
    for c in schema.columns:
        k += (len(c.categories) - 1) if c.kind is ColumnKind.CATEGORICAL else 1
    return k


def encode(ds: Dataset) -> EncodedMatrix:
    if ds.n == 0:
        raise SchemaError("cannot encode an empty dataset")
    k = encoded_width(ds.schema)
    data = np.empty((ds.n, k), dtype=np.float64)
    column_map: list[tuple[str, str]] = []
    degenerate: list[str] = []
    j = 0
    for spec, arr in zip(ds.schema.columns, ds.columns):
        if spec.kind is ColumnKind.CATEGORICAL:
            # reference level = first category
            for level in range(1, len(spec.categories)):
                data[:, j] = (arr == level).astype(np.float64)
                column_map.append((spec.name, spec.categories[level]))
                j += 1
        else:
            mean = float(arr.mean())
            sd = float(arr.std())
            if sd > 0.0:
                data[:, j] = (arr - mean) / sd
            else:
                data[:, j] = 0.0
                degenerate.append(spec.name)
            column_map.append((spec.name, "scaled-continuous"))
            j += 1
    return EncodedMatrix(
        rows=ds.n,
        cols=k,
        data=data,
        column_map=tuple(column_map),
        degenerate_columns=tuple(degenerate),
    )


# -------------------------------------------------------------------- Gower ---

def column_ranges(ds: Dataset) -> tuple[tuple[float, float] | None, ...]:
    """Per-column (min, max) for continuous columns; schema bounds win over
    observed values when declared. None for categorical columns."""
    out: list[tuple[float, float] | None] = []
    for spec, arr in zip(ds.schema.columns, ds.columns):
        if spec.kind is ColumnKind.CATEGORICAL:
            out.append(None)
        elif spec.bounds is not None:
            out.append(spec.bounds)
        else:
            out.append((float(arr.min()), float(arr.max())) if arr.size else (0.0, 0.0))
    return tuple(out)


def gower_distance(a: Sequence, b: Sequence, schema: Schema, ranges: Sequence) -> float:
    """Mean per-column distance: range-normalized |a-b| for continuous
    (0 when the range is degenerate), 0/1 mismatch for categorical."""
    total = 0.0
    for j, spec in enumerate(schema.columns):
        if spec.kind is ColumnKind.CATEGORICAL:
            total += 0.0 if a[j] == b[j] else 1.0
        else:
            lo, hi = ranges[j]
            span = hi - lo
            if span <= 0.0:
                continue
            total += min(abs(float(a[j]) - float(b[j])) / span, 1.0)
    return total / len(schema.columns)
