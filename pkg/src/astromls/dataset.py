"""CSV ingestion, column-kind inference, imputation, feature hashing and fold planning.

The pipeline is ``load_csv -> infer_schema -> encode`` (``encode`` runs
``impute`` and ``hash_features`` internally), followed by ``make_folds`` for
cross-validation.  Every type here is immutable once built.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import BinaryIO, Iterable, Mapping, Sequence, Union

import numpy as np

from ._util import frozen, make_rng
from .errors import ImputationError, ParameterError, ParseError, SchemaError

DEFAULT_MISSING_TOKENS = frozenset({"", "?", "NA"})
DEFAULT_HASH_DIMS = 256
MAX_NUMERIC_LABEL_CODES = 32

_NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class ColumnKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: ColumnKind
    missing_count: int = 0

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind.value, "missing_count": self.missing_count}


@dataclass(frozen=True)
class RawTable:
    """Untyped CSV content: one tuple of text cells per header, ``None`` = missing."""

    names: tuple[str, ...]
    cells: tuple[tuple[str | None, ...], ...]

    @property
    def n_rows(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    def column(self, name: str) -> tuple[str | None, ...]:
        return self.cells[self.names.index(name)]

    def missing_count(self, name: str) -> int:
        return sum(c is None for c in self.column(name))


@dataclass(frozen=True)
class Table:
    """Typed column store.

    Continuous columns are float arrays with NaN as the missing marker;
    categorical columns are tuples of ``str`` with ``None`` as the marker.
    """

    columns: tuple[ColumnSpec, ...]
    data: Mapping[str, object]
    n_rows: int

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names: {names}")
        fixed = {}
        for spec in self.columns:
            values = self.data[spec.name]
            if spec.kind is ColumnKind.CONTINUOUS:
                arr = frozen(values, dtype=float)
                if arr.shape != (self.n_rows,):
                    raise SchemaError(f"column {spec.name!r} has {arr.shape} cells, expected {self.n_rows}")
                if np.isinf(arr).any():
                    raise SchemaError(f"column {spec.name!r} contains non-finite values")
                fixed[spec.name] = arr
            else:
                cells = tuple(None if v is None else str(v) for v in values)
                if len(cells) != self.n_rows:
                    raise SchemaError(f"column {spec.name!r} has {len(cells)} cells, expected {self.n_rows}")
                fixed[spec.name] = cells
        object.__setattr__(self, "data", fixed)

    @classmethod
    def from_columns(cls, columns: Mapping[str, Sequence]) -> "Table":
        """Build a table from plain Python lists.

        A column whose non-missing entries are all numbers is continuous,
        anything else categorical.  ``None`` (or NaN in a numeric column)
        marks a missing cell.
        """
        specs, data, n = [], {}, None
        for name, values in columns.items():
            values = list(values)
            n = len(values) if n is None else n
            observed = [v for v in values if v is not None]
            numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in observed)
            if numeric and observed:
                arr = np.array([np.nan if v is None else float(v) for v in values])
                specs.append(ColumnSpec(name, ColumnKind.CONTINUOUS, int(np.isnan(arr).sum())))
                data[name] = arr
            else:
                cells = tuple(None if v is None else str(v) for v in values)
                specs.append(ColumnSpec(name, ColumnKind.CATEGORICAL, sum(c is None for c in cells)))
                data[name] = cells
        return cls(tuple(specs), data, n or 0)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def spec(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column named {name!r}")

    def column(self, name: str):
        self.spec(name)
        return self.data[name]

    @property
    def continuous_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.kind is ColumnKind.CONTINUOUS)

    @property
    def categorical_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.kind is ColumnKind.CATEGORICAL)

    @property
    def total_missing(self) -> int:
        return sum(c.missing_count for c in self.columns)

    def drop(self, name: str) -> "Table":
        self.spec(name)
        cols = tuple(c for c in self.columns if c.name != name)
        return Table(cols, {c.name: self.data[c.name] for c in cols}, self.n_rows)

    def take(self, rows: Sequence[int]) -> "Table":
        """Row subset (or reordering) by integer index."""
        rows = np.asarray(rows, dtype=np.intp)
        data, cols = {}, []
        for spec in self.columns:
            values = self.data[spec.name]
            if spec.kind is ColumnKind.CONTINUOUS:
                sub = values[rows]
                missing = int(np.isnan(sub).sum())
            else:
                sub = tuple(values[i] for i in rows)
                missing = sum(v is None for v in sub)
            data[spec.name] = sub
            cols.append(ColumnSpec(spec.name, spec.kind, missing))
        return Table(tuple(cols), data, len(rows))


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        values = frozen(self.values, dtype=float)
        if values.ndim != 2:
            raise ParameterError(f"feature matrix must be 2-D, got shape {values.shape}")
        if len(self.feature_names) != values.shape[1]:
            raise ParameterError(
                f"{len(self.feature_names)} feature names for {values.shape[1]} columns"
            )
        if not np.isfinite(values).all():
            raise ParameterError("feature matrix contains NaN or infinite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def of(cls, values) -> "FeatureMatrix":
        """Wrap a bare array, naming columns ``x0, x1, ...``."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        return cls(values, tuple(f"x{j}" for j in range(values.shape[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.values[np.asarray(rows, dtype=np.intp)], self.feature_names)


@dataclass(frozen=True)
class LabeledDataset:
    """Encoded features plus integer labels.

    Only ``labels < len(class_names)`` is enforced on construction, so fold
    subsets may lack a class; :func:`encode` additionally requires every class
    to be present.
    """

    features: FeatureMatrix
    labels: np.ndarray
    class_names: tuple[str, ...]
    source: Table | None = None
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        labels = frozen(self.labels, dtype=np.int64)
        if labels.shape != (self.features.shape[0],):
            raise ParameterError(f"{labels.shape[0]} labels for {self.features.shape[0]} rows")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise ParameterError("label index out of range")
        if self.source is not None and self.source.n_rows != labels.size:
            raise ParameterError("source table row count does not match labels")
        row_ids = np.arange(labels.size) if self.row_ids is None else self.row_ids
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "row_ids", frozen(row_ids, dtype=np.int64))

    @classmethod
    def from_arrays(cls, x, y, class_names: Sequence[str] | None = None) -> "LabeledDataset":
        y = np.asarray(y, dtype=np.int64)
        if class_names is None:
            class_names = [str(i) for i in range(int(y.max()) + 1)] if y.size else []
        return cls(FeatureMatrix.of(x), y, tuple(class_names))

    @property
    def n_rows(self) -> int:
        return self.labels.size

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def x(self) -> np.ndarray:
        return self.features.values

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return LabeledDataset(
            self.features.take(rows),
            self.labels[rows],
            self.class_names,
            None if self.source is None else self.source.take(rows),
            self.row_ids[rows],
        )

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "feature_names": list(self.features.feature_names),
            "class_names": list(self.class_names),
            "row_ids": self.row_ids.tolist(),
            "labels": self.labels.tolist(),
            "values": self.features.values.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class FoldPlan:
    assignment: np.ndarray
    k: int
    seed: int
    stratified: bool = True

    def __post_init__(self):
        a = frozen(self.assignment, dtype=np.int64)
        if a.ndim != 1 or (a.size and (a.min() < 0 or a.max() >= self.k)):
            raise ParameterError("fold assignment entries must lie in [0, k)")
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return self.assignment.size

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "k": self.k,
            "seed": self.seed,
            "stratified": self.stratified,
            "assignment": self.assignment.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        d = json.loads(text)
        if d.get("version") != 1:
            raise SchemaError(f"unsupported fold plan version {d.get('version')!r}")
        return cls(np.array(d["assignment"], dtype=np.int64), int(d["k"]), int(d["seed"]),
                   bool(d.get("stratified", True)))


# --------------------------------------------------------------------------
# ingestion


Source = Union[bytes, str, os.PathLike, BinaryIO]


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    return source.read()


def load_csv(source: Source, missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS) -> RawTable:
    """Read a UTF-8 CSV with a header row into a :class:`RawTable`.

    ``source`` may be raw bytes, a path, or a binary file object.  Cells are
    whitespace-stripped; a cell equal to one of ``missing_tokens`` becomes
    ``None``.  Blank lines are skipped.
    """
    raw = _read_bytes(source)
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8: {exc}") from None
    missing = frozenset(missing_tokens)
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        header = None
        rows: list[list[str | None]] = []
        for record in reader:
            # blank line (also swallows an empty cell in a 1-column file)
            if len(record) <= 1 and not "".join(record).strip():
                continue
            if header is None:
                header = [h.strip() for h in record]
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(record)}", line=reader.line_num
                )
            rows.append([None if c.strip() in missing else c.strip() for c in record])
    except csv.Error as exc:
        raise ParseError(str(exc), line=reader.line_num) from None

    if header is None:
        raise SchemaError("empty CSV: no header row")
    seen = set()
    for name in header:
        if name in seen:
            raise SchemaError(f"duplicate header name {name!r}")
        seen.add(name)
    cells = tuple(tuple(row[j] for row in rows) for j in range(len(header)))
    return RawTable(tuple(header), cells)


def parse_number(cell: str) -> float | None:
    """Parse a plain decimal literal; anything else (including inf/nan) is ``None``."""
    if not _NUMBER_RE.fullmatch(cell):
        return None
    value = float(cell)
    return value if math.isfinite(value) else None


def infer_schema(raw: RawTable, numeric_threshold: float = 1.0) -> Table:
    """Type every column as continuous or categorical.

    A column is continuous when at least ``numeric_threshold`` of its observed
    cells are finite decimal literals.  In a continuous column, cells that do
    not parse become missing.
    """
    if not 0.5 <= numeric_threshold <= 1.0:
        raise ParameterError(f"numeric_threshold must lie in [0.5, 1], got {numeric_threshold}")
    if not raw.names:
        raise SchemaError("table has no columns")
    specs, data = [], {}
    for name, column in zip(raw.names, raw.cells):
        observed = [c for c in column if c is not None]
        if not observed:
            raise SchemaError(f"column {name!r} has no observed cells")
        parsed = [None if c is None else parse_number(c) for c in column]
        n_numeric = sum(p is not None for p in parsed)
        if n_numeric >= numeric_threshold * len(observed):
            arr = np.array([np.nan if p is None else p for p in parsed], dtype=float)
            specs.append(ColumnSpec(name, ColumnKind.CONTINUOUS, int(np.isnan(arr).sum())))
            data[name] = arr
        else:
            specs.append(ColumnSpec(name, ColumnKind.CATEGORICAL, len(column) - len(observed)))
            data[name] = column
    return Table(tuple(specs), data, raw.n_rows)


def coerce_to_schema(raw: RawTable, columns: Sequence[ColumnSpec]) -> Table:
    """Type ``raw`` using a previously inferred schema (e.g. a test file).

    Columns are matched by name; an unparseable cell in a continuous column
    is an error here, since the kinds are fixed.
    """
    specs, data = [], {}
    for spec in columns:
        if spec.name not in raw.names:
            raise SchemaError(f"input lacks column {spec.name!r}")
        column = raw.column(spec.name)
        if spec.kind is ColumnKind.CONTINUOUS:
            values = []
            for i, c in enumerate(column):
                if c is None:
                    values.append(np.nan)
                    continue
                p = parse_number(c)
                if p is None:
                    raise SchemaError(f"column {spec.name!r} row {i}: {c!r} is not a number")
                values.append(p)
            arr = np.array(values, dtype=float)
            specs.append(ColumnSpec(spec.name, spec.kind, int(np.isnan(arr).sum())))
            data[spec.name] = arr
        else:
            specs.append(ColumnSpec(spec.name, spec.kind, sum(c is None for c in column)))
            data[spec.name] = column
    return Table(tuple(specs), data, raw.n_rows)


# --------------------------------------------------------------------------
# imputation


def imputation_values(t: Table) -> dict[str, float | str]:
    """Per-column fill value: mean for continuous, mode for categorical.

    Mode ties go to the lexicographically smallest category.
    """
    fills: dict[str, float | str] = {}
    for spec in t.columns:
        values = t.data[spec.name]
        if spec.kind is ColumnKind.CONTINUOUS:
            observed = values[~np.isnan(values)]
            if observed.size == 0:
                raise ImputationError(f"column {spec.name!r} has no observed cells")
            fills[spec.name] = math.fsum(observed.tolist()) / observed.size
        else:
            counts = Counter(v for v in values if v is not None)
            if not counts:
                raise ImputationError(f"column {spec.name!r} has no observed cells")
            fills[spec.name] = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return fills


def apply_imputation(t: Table, fills: Mapping[str, float | str]) -> Table:
    data, cols = {}, []
    for spec in t.columns:
        values = t.data[spec.name]
        fill = fills[spec.name]
        if spec.kind is ColumnKind.CONTINUOUS:
            data[spec.name] = np.where(np.isnan(values), float(fill), values)
        else:
            data[spec.name] = tuple(fill if v is None else v for v in values)
        cols.append(ColumnSpec(spec.name, spec.kind, 0))
    return Table(tuple(cols), data, t.n_rows)


def impute(t: Table) -> Table:
    """Fill missing cells with the column mean (continuous) or mode (categorical)."""
    return apply_imputation(t, imputation_values(t))


# --------------------------------------------------------------------------
# feature hashing


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


@lru_cache(maxsize=65536)
def _hash_slot(token: str, dims: int) -> tuple[int, float]:
    h = fnv1a_64(token.encode("utf-8"))
    return h % dims, (-1.0 if h >> 63 else 1.0)


def hash_features(t: Table, dims: int = DEFAULT_HASH_DIMS, include_continuous: bool = True) -> FeatureMatrix:
    """Signed feature hashing of categorical cells, continuous columns appended.

    The token for a cell is ``"<column>=<value>"``; its FNV-1a 64-bit hash
    picks the bucket (``h mod dims``) and the sign (bit 63).
    """
    if dims < 2:
        raise ParameterError(f"hash dims must be >= 2, got {dims}")
    if t.total_missing:
        raise ImputationError("hash_features requires a fully imputed table")
    hashed = np.zeros((t.n_rows, dims))
    for name in t.categorical_names:
        for i, value in enumerate(t.data[name]):
            bucket, sign = _hash_slot(f"{name}={value}", dims)
            hashed[i, bucket] += sign
    names = [f"h{j}" for j in range(dims)]
    blocks = [hashed]
    if include_continuous and t.continuous_names:
        blocks.append(np.column_stack([t.data[n] for n in t.continuous_names]))
        names.extend(t.continuous_names)
    return FeatureMatrix(np.hstack(blocks), tuple(names))


# --------------------------------------------------------------------------
# label encoding


def _label_text(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def label_strings(t: Table, label_column: str) -> list[str | None]:
    spec = t.spec(label_column)
    values = t.data[label_column]
    if spec.kind is ColumnKind.CATEGORICAL:
        return list(values)
    distinct = set(values[~np.isnan(values)].tolist())
    if len(distinct) > MAX_NUMERIC_LABEL_CODES:
        raise SchemaError(
            f"label column {label_column!r} is continuous with {len(distinct)} distinct values"
        )
    return [None if math.isnan(v) else _label_text(v) for v in values.tolist()]


def encode(
    t: Table,
    label_column: str,
    dims: int = DEFAULT_HASH_DIMS,
    include_continuous: bool = True,
) -> LabeledDataset:
    """Impute, hash and label-encode ``t`` into a :class:`LabeledDataset`.

    Classes are numbered in lexicographic order of their names.  Rows whose
    label is missing are dropped; ``row_ids`` keeps the original indices.
    """
    if label_column not in t.names:
        raise SchemaError(f"label column {label_column!r} not found")
    text = label_strings(t, label_column)
    keep = np.array([v is not None for v in text], dtype=bool)
    if not keep.any():
        raise SchemaError(f"label column {label_column!r} has no observed cells")
    row_ids = np.flatnonzero(keep)
    text = [text[i] for i in row_ids]
    class_names = tuple(sorted(set(text)))
    if len(class_names) < 2:
        raise SchemaError(f"degenerate labels: column {label_column!r} has a single class")
    index = {name: i for i, name in enumerate(class_names)}
    labels = np.array([index[v] for v in text], dtype=np.int64)

    features_table = t.drop(label_column)
    if not features_table.columns:
        raise SchemaError("no feature columns besides the label")
    if row_ids.size != t.n_rows:
        features_table = features_table.take(row_ids)
    source = impute(features_table)
    features = hash_features(source, dims, include_continuous)
    return LabeledDataset(features, labels, class_names, source, row_ids)


# --------------------------------------------------------------------------
# folds


def make_folds(labels, k: int = 10, seed: int = 0, stratified: bool = True) -> FoldPlan:
    """Assign rows to ``k`` folds.

    Rows are shuffled (within each class when stratified), the classes are
    laid end to end in index order, and position ``p`` goes to fold
    ``p mod k``.  This keeps overall fold sizes, and per-class counts when
    stratified, within one of each other.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if k < 2:
        raise ParameterError(f"fold count must be >= 2, got {k}")
    if k > n:
        raise ParameterError(f"fold count {k} exceeds row count {n}")
    rng = make_rng(seed)
    if stratified:
        order = np.concatenate(
            [rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)]
        )
    else:
        order = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(assignment, k, int(seed), stratified)
