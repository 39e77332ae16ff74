"""Columnar datasets, replicate sample sets and their file formats.

A :class:`Dataset` holds the fixed features and the observed target column.
Model replicates live separately in a :class:`ModelSampleSet` so a statistic
can be evaluated against (features, one target vector) without copying the
table for every replicate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    EmptySampleSetError,
    MissingColumnError,
    MissingFileError,
    MissingValueError,
    NonFiniteSampleError,
    RaggedRowError,
    ReplicateLengthMismatchError,
    SchemaError,
    TargetNotNumericError,
)

REAL, INTEGER, CATEGORICAL, BOOLEAN = "real", "integer", "categorical", "boolean"
KINDS = (REAL, INTEGER, CATEGORICAL, BOOLEAN)
NUMERIC_KINDS = (REAL, INTEGER)

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}
_TRUE, _FALSE = {"true"}, {"false"}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Column:
    """One typed column.

    Categorical columns store interned integer codes in ``values`` and the
    label table in ``labels`` (code ``i`` means ``labels[i]``).
    """

    name: str
    kind: str
    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column names must be nonempty")
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        dtype = {REAL: np.float64, INTEGER: np.int64, CATEGORICAL: np.int64, BOOLEAN: np.bool_}
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=dtype[self.kind])))
        if self.kind == CATEGORICAL:
            if len(self.values) and (self.values.min() < 0 or self.values.max() >= len(self.labels)):
                raise SchemaError(f"column {self.name!r}: code outside label table")
        if self.kind == REAL and not np.all(np.isfinite(self.values)):
            bad = int(np.flatnonzero(~np.isfinite(self.values))[0])
            raise MissingValueError(bad, self.name)

    def __len__(self):
        return len(self.values)

    @property
    def is_numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS

    def decoded(self) -> list:
        """Values as plain Python objects (labels for categoricals)."""
        if self.kind == CATEGORICAL:
            return [self.labels[c] for c in self.values]
        if self.kind == BOOLEAN:
            return [bool(v) for v in self.values]
        if self.kind == INTEGER:
            return [int(v) for v in self.values]
        return [float(v) for v in self.values]

    def as_float(self) -> np.ndarray:
        if self.kind == CATEGORICAL:
            raise SchemaError(f"column {self.name!r} is categorical")
        return self.values.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, Column):
            return NotImplemented
        return (
            self.name == other.name
            and self.kind == other.kind
            and self.labels == other.labels
            and np.array_equal(self.values, other.values)
        )

    @classmethod
    def from_values(cls, name: str, values: Sequence, kind: str | None = None) -> "Column":
        """Build a column from Python values, inferring ``kind`` when omitted."""
        values = list(values)
        for i, v in enumerate(values):
            if v is None or (isinstance(v, float) and math.isnan(v)):
                raise MissingValueError(i, name)
        if kind is None:
            kind = _infer_kind_py(values)
        if kind == CATEGORICAL:
            labels: dict[str, int] = {}
            codes = [labels.setdefault(str(v), len(labels)) for v in values]
            return cls(name, kind, np.asarray(codes, dtype=np.int64), tuple(labels))
        return cls(name, kind, np.asarray(values))


def _infer_kind_py(values: list) -> str:
    if all(isinstance(v, (bool, np.bool_)) for v in values):
        return BOOLEAN
    if all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in values):
        return INTEGER
    if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in values):
        return REAL
    return CATEGORICAL


@dataclass(frozen=True)
class ColumnInfo:
    """Schema entry: what a proposer may know about a column without the data."""

    name: str
    kind: str
    levels: tuple = ()
    counts: tuple[int, ...] = ()
    is_target: bool = False

    @property
    def is_binary(self) -> bool:
        return self.kind != REAL and len(self.levels) == 2


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnInfo, ...]
    target: str

    @property
    def features(self) -> tuple[ColumnInfo, ...]:
        return tuple(c for c in self.columns if not c.is_target)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def __getitem__(self, name: str) -> ColumnInfo:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)


# Integer columns with at most this many distinct values are treated as levels
# (sliceable by equality) rather than as a continuous feature.
MAX_LEVELS = 5


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable columnar table of features plus one numeric target column."""

    name: str
    columns: Mapping[str, Column]
    target: str

    def __post_init__(self):
        cols = dict(self.columns)
        if not cols:
            raise SchemaError("dataset has no columns")
        for key, col in cols.items():
            if key != col.name:
                raise SchemaError(f"column key {key!r} differs from column name {col.name!r}")
        lengths = {len(c) for c in cols.values()}
        if len(lengths) != 1:
            raise SchemaError(f"column lengths differ: {sorted(lengths)}")
        if self.target not in cols:
            raise MissingColumnError(self.target)
        if not cols[self.target].is_numeric:
            raise TargetNotNumericError(self.target, cols[self.target].kind)
        object.__setattr__(self, "columns", cols)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values())))

    @property
    def y(self) -> np.ndarray:
        return self.columns[self.target].as_float()

    @property
    def feature_names(self) -> list[str]:
        return [c for c in self.columns if c != self.target]

    def __getitem__(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise MissingColumnError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.target == other.target
            and list(self.columns) == list(other.columns)
            and all(self.columns[k] == other.columns[k] for k in self.columns)
        )

    def with_target(self, y: np.ndarray, name: str | None = None) -> "Dataset":
        cols = dict(self.columns)
        cols[self.target] = Column(self.target, REAL, np.asarray(y, dtype=float))
        return Dataset(name or self.name, cols, self.target)

    def schema(self) -> Schema:
        infos = []
        for col in self.columns.values():
            levels: tuple = ()
            counts: tuple = ()
            if col.kind == CATEGORICAL:
                codes, n = np.unique(col.values, return_counts=True)
                # frequency-descending, ties broken by first appearance (= code order)
                order = sorted(range(len(codes)), key=lambda i: (-n[i], codes[i]))
                levels = tuple(col.labels[codes[i]] for i in order)
                counts = tuple(int(n[i]) for i in order)
            elif col.kind == BOOLEAN or col.kind == INTEGER:
                vals, n = np.unique(col.values, return_counts=True)
                if col.kind == BOOLEAN or len(vals) <= MAX_LEVELS:
                    conv = bool if col.kind == BOOLEAN else int
                    levels = tuple(conv(v) for v in vals)
                    counts = tuple(int(c) for c in n)
            infos.append(ColumnInfo(col.name, col.kind, levels, counts, col.name == self.target))
        return Schema(tuple(infos), self.target)

    def to_record(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "target": self.target,
            "types": {k: c.kind for k, c in self.columns.items()},
            "columns": {k: c.decoded() for k, c in self.columns.items()},
        }

    @classmethod
    def from_columns(cls, name: str, data: Mapping[str, Sequence], target: str,
                     types: Mapping[str, str] | None = None) -> "Dataset":
        types = dict(types or {})
        cols = {}
        for key, values in data.items():
            cols[key] = Column.from_values(key, values, types.get(key))
        return cls(name, cols, target)


@dataclass(frozen=True)
class DatasetMetadata:
    description: str = ""
    column_descriptions: Mapping[str, str] = field(default_factory=dict)

    def validate_against(self, d: Dataset) -> None:
        for col in self.column_descriptions:
            if col not in d:
                raise MissingColumnError(col)

    def describe(self, column: str) -> str:
        return self.column_descriptions.get(column, "")

    def to_record(self) -> dict[str, Any]:
        return {"description": self.description, "columns": dict(self.column_descriptions)}


@dataclass(frozen=True, eq=False)
class ModelSampleSet:
    """``m`` replicate target vectors stored as an ``(m, n_rows)`` array."""

    replicates: np.ndarray
    model_id: str = "model"

    def __post_init__(self):
        reps = np.asarray(self.replicates, dtype=np.float64)
        if reps.ndim != 2 or reps.shape[0] == 0:
            raise EmptySampleSetError()
        bad = np.argwhere(~np.isfinite(reps))
        if len(bad):
            raise NonFiniteSampleError(int(bad[0, 0]), int(bad[0, 1]))
        object.__setattr__(self, "replicates", _frozen(reps))

    @property
    def m(self) -> int:
        return self.replicates.shape[0]

    @property
    def n_rows(self) -> int:
        return self.replicates.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ModelSampleSet):
            return NotImplemented
        return self.model_id == other.model_id and np.array_equal(self.replicates, other.replicates)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], model_id: str = "model") -> "ModelSampleSet":
        rows = [list(r) for r in rows]
        if not rows:
            raise EmptySampleSetError()
        expected = len(rows[0])
        for i, r in enumerate(rows):
            if len(r) != expected:
                raise ReplicateLengthMismatchError(i, expected, len(r))
        for i, r in enumerate(rows):
            for j, v in enumerate(r):
                if v is None or not math.isfinite(float(v)):
                    raise NonFiniteSampleError(i, j)
        return cls(np.asarray(rows, dtype=np.float64), model_id)

    def to_record(self) -> dict[str, Any]:
        return {"model_id": self.model_id, "replicates": self.replicates.tolist()}


@dataclass(frozen=True)
class ModelRepresentation:
    """Symbolic model source shown to a proposer, plus an optional family tag."""

    program_text: str
    family: Any = None


# --- validation -----------------------------------------------------------

def validate_alignment(d: Dataset, s: ModelSampleSet) -> None:
    if s.m == 0:
        raise EmptySampleSetError()
    if s.n_rows != d.n_rows:
        raise AlignmentError(d.n_rows, s.n_rows)


# --- file formats ---------------------------------------------------------

def _check_exists(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(p)
    return p


def _parse_cells(name: str, cells: list[str], forced: str | None) -> Column:
    for i, c in enumerate(cells):
        if c.strip().lower() in _MISSING_TOKENS:
            raise MissingValueError(i, name)
    stripped = [c.strip() for c in cells]
    kind = forced or _infer_kind_text(stripped)
    if kind == INTEGER:
        return Column(name, kind, np.array([int(c) for c in stripped], dtype=np.int64))
    if kind == REAL:
        return Column(name, kind, np.array([float(c) for c in stripped], dtype=np.float64))
    if kind == BOOLEAN:
        return Column(name, kind, np.array([c.lower() in _TRUE for c in stripped]))
    return Column.from_values(name, stripped, CATEGORICAL)


def _infer_kind_text(cells: list[str]) -> str:
    def all_parse(conv):
        try:
            for c in cells:
                conv(c)
        except ValueError:
            return False
        return True

    if all_parse(int):
        return INTEGER
    if all_parse(float) and all(math.isfinite(float(c)) for c in cells):
        return REAL
    if all(c.lower() in _TRUE | _FALSE for c in cells):
        return BOOLEAN
    return CATEGORICAL


def load_dataset(path, target: str | None = None, name: str | None = None,
                 types: Mapping[str, str] | None = None) -> Dataset:
    """Load a dataset from CSV (header row, comma separated) or a JSON record.

    ``target`` overrides the target named inside a JSON record; for CSV it is
    required. Row numbers in errors are 0-based data rows (header excluded).
    """
    p = _check_exists(path)
    if p.suffix.lower() == ".json":
        rec = json.loads(p.read_text(encoding="utf-8"))
        if not isinstance(rec, dict) or not isinstance(rec.get("columns"), dict):
            raise SchemaError("dataset record needs a 'columns' mapping")
        tgt = target or rec.get("target")
        if tgt is None:
            raise SchemaError("no target column given")
        merged_types = {**rec.get("types", {}), **(types or {})}
        data = rec["columns"]
        lengths = {k: len(v) for k, v in data.items()}
        if len(set(lengths.values())) > 1:
            # first row index that some column lacks
            row = min(lengths.values())
            raise RaggedRowError(row, len(data), sum(n > row for n in lengths.values()))
        if tgt not in data:
            raise MissingColumnError(tgt)
        return Dataset.from_columns(name or rec.get("name") or p.stem, data, tgt, merged_types)

    if target is None:
        raise SchemaError("CSV datasets need an explicit target column")
    with p.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("empty file")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise SchemaError("column names must be nonempty")
    if len(set(header)) != len(header):
        raise SchemaError("duplicate column names")
    body = [r for r in rows[1:] if r != []]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise RaggedRowError(i, len(header), len(r))
    if target not in header:
        raise MissingColumnError(target)
    types = dict(types or {})
    cols = {}
    for j, h in enumerate(header):
        cols[h] = _parse_cells(h, [r[j] for r in body], types.get(h))
    return Dataset(name or p.stem, cols, target)


def write_dataset(d: Dataset, path) -> None:
    """Write ``d`` as CSV or JSON (by suffix). JSON preserves column kinds exactly."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        p.write_text(json.dumps(d.to_record(), indent=1), encoding="utf-8")
        return
    cols = list(d.columns.values())
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([c.name for c in cols])
        decoded = [c.decoded() for c in cols]
        for i in range(d.n_rows):
            row = []
            for c, vals in zip(cols, decoded):
                v = vals[i]
                row.append(repr(v) if c.kind == REAL else str(v).lower() if c.kind == BOOLEAN else str(v))
            w.writerow(row)


def load_samples(path, model_id: str | None = None) -> ModelSampleSet:
    """Load replicates from a JSON record or a wide CSV (one replicate per row)."""
    p = _check_exists(path)
    if p.suffix.lower() == ".json":
        rec = json.loads(p.read_text(encoding="utf-8"))
        if not isinstance(rec, dict) or not isinstance(rec.get("replicates"), list):
            raise SchemaError("sample record needs a 'replicates' list")
        return ModelSampleSet.from_rows(rec["replicates"], model_id or rec.get("model_id") or p.stem)
    with p.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]  # header line
    parsed = []
    for i, r in enumerate(rows):
        vals = []
        for j, c in enumerate(r):
            try:
                vals.append(float(c))
            except ValueError:
                raise NonFiniteSampleError(i, j) from None
        parsed.append(vals)
    return ModelSampleSet.from_rows(parsed, model_id or p.stem)


def write_samples(s: ModelSampleSet, path) -> None:
    p = Path(path)
    if p.suffix.lower() == ".json":
        p.write_text(json.dumps(s.to_record()), encoding="utf-8")
    else:
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for row in s.replicates:
                w.writerow([repr(float(v)) for v in row])


def load_metadata(path) -> DatasetMetadata:
    p = _check_exists(path)
    rec = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(rec, dict):
        raise SchemaError("metadata must be a record")
    cols = rec.get("columns", {})
    if not isinstance(cols, dict):
        raise SchemaError("metadata 'columns' must map names to descriptions")
    return DatasetMetadata(str(rec.get("description", "")), {str(k): str(v) for k, v in cols.items()})
