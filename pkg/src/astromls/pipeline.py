"""Fitted preprocessing: imputation, hashing, optional standardization and PCA.

:func:`fit_preprocessing` learns every statistic from one table and returns a
:class:`Preprocessor` that replays them on any other table with the same
columns (a test file, or the held-out rows of a fold).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    DEFAULT_HASH_DIMS,
    ColumnKind,
    ColumnSpec,
    FeatureMatrix,
    LabeledDataset,
    Table,
    apply_imputation,
    hash_features,
    imputation_values,
    label_strings,
)
from .errors import SchemaError
from .reduce import PcaModel, Scaler, fit_pca, fit_scaler, pca_transform, should_standardize


@dataclass(frozen=True)
class PrepConfig:
    label: str
    hash_dims: int = DEFAULT_HASH_DIMS
    include_continuous: bool = True
    standardize: bool | None = None   # None: auto, only when PCA is requested
    pca: int | None = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "hash_dims": self.hash_dims,
            "include_continuous": self.include_continuous,
            "standardize": self.standardize,
            "pca": self.pca,
        }


@dataclass(frozen=True)
class Preprocessor:
    config: PrepConfig
    columns: tuple[ColumnSpec, ...]
    fills: dict
    class_names: tuple[str, ...]
    scaler: Scaler | None = None
    pca: PcaModel | None = None
    notes: dict = field(default_factory=dict)

    def source_table(self, table: Table) -> Table:
        """Feature columns of ``table`` (label dropped), imputed with the fitted fills."""
        names = [c.name for c in self.columns]
        for spec in self.columns:
            actual = table.spec(spec.name)
            if actual.kind is not spec.kind:
                raise SchemaError(
                    f"column {spec.name!r} is {actual.kind.value}, expected {spec.kind.value}"
                )
        sub = Table(tuple(table.spec(n) for n in names), {n: table.data[n] for n in names}, table.n_rows)
        return apply_imputation(sub, self.fills)

    def features(self, table: Table) -> tuple[FeatureMatrix, Table]:
        source = self.source_table(table)
        fm = hash_features(source, self.config.hash_dims, self.config.include_continuous)
        if self.scaler is not None:
            fm = self.scaler.transform(fm)
        if self.pca is not None:
            fm = pca_transform(self.pca, fm)
        return fm, source

    def labels(self, table: Table) -> tuple[np.ndarray, np.ndarray]:
        """``(labels, kept_rows)``; rows with a missing label are dropped."""
        text = label_strings(table, self.config.label)
        index = {name: i for i, name in enumerate(self.class_names)}
        kept = np.array([i for i, v in enumerate(text) if v is not None], dtype=np.int64)
        unknown = sorted({text[i] for i in kept} - set(index))
        if unknown:
            raise SchemaError(f"labels {unknown} were not seen when fitting")
        return np.array([index[text[i]] for i in kept], dtype=np.int64), kept

    def dataset(self, table: Table) -> LabeledDataset:
        labels, kept = self.labels(table)
        if kept.size != table.n_rows:
            table = table.take(kept)
        fm, source = self.features(table)
        return LabeledDataset(fm, labels, self.class_names, source, kept)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "config": self.config.to_dict(),
            "columns": [c.to_dict() for c in self.columns],
            "fills": self.fills,
            "class_names": list(self.class_names),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "pca": None if self.pca is None else self.pca.to_dict(),
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        if d.get("version") != 1:
            raise SchemaError(f"unsupported preprocessing version {d.get('version')!r}")
        cfg = d["config"]
        columns = tuple(ColumnSpec(c["name"], ColumnKind(c["kind"]), 0) for c in d["columns"])
        return cls(
            config=PrepConfig(cfg["label"], int(cfg["hash_dims"]), bool(cfg["include_continuous"]),
                              cfg["standardize"], cfg["pca"]),
            columns=columns,
            fills=dict(d["fills"]),
            class_names=tuple(d["class_names"]),
            scaler=None if d.get("scaler") is None else Scaler.from_dict(d["scaler"]),
            pca=None if d.get("pca") is None else PcaModel.from_dict(d["pca"]),
            notes=dict(d.get("notes", {})),
        )


def class_names_of(table: Table, label: str) -> tuple[str, ...]:
    if label not in table.names:
        raise SchemaError(f"label column {label!r} not found")
    names = tuple(sorted({v for v in label_strings(table, label) if v is not None}))
    if len(names) < 2:
        raise SchemaError(f"degenerate labels: column {label!r} has fewer than two classes")
    return names


def fit_preprocessing(
    table: Table, config: PrepConfig, class_names: tuple[str, ...] | None = None
) -> tuple[Preprocessor, LabeledDataset]:
    """Learn preprocessing statistics from ``table`` and encode it.

    ``class_names`` fixes the class index order (pass the full dataset's
    classes when fitting on a fold).
    """
    if class_names is None:
        class_names = class_names_of(table, config.label)
    if config.label not in table.names:
        raise SchemaError(f"label column {config.label!r} not found")
    features_table = table.drop(config.label)
    if not features_table.columns:
        raise SchemaError("no feature columns besides the label")
    text = label_strings(table, config.label)
    kept = np.array([i for i, v in enumerate(text) if v is not None], dtype=np.int64)
    observed = features_table.take(kept) if kept.size != table.n_rows else features_table
    fills = imputation_values(observed)
    base = Preprocessor(config, features_table.columns, fills, tuple(class_names))
    raw = hash_features(apply_imputation(observed, fills), config.hash_dims, config.include_continuous)

    notes = {}
    scaler = pca = None
    standardize = config.standardize
    if standardize is None:
        standardize = config.pca is not None and should_standardize(raw)
        notes["standardize_rule"] = (
            "auto: standardize before PCA when non-constant column variances differ by more than 10x"
        )
    notes["standardized"] = bool(standardize)
    matrix = raw
    if standardize:
        scaler = fit_scaler(raw)
        matrix = scaler.transform(raw)
    if config.pca is not None:
        pca = fit_pca(matrix, config.pca)
    prep = Preprocessor(config, base.columns, fills, base.class_names, scaler, pca, notes)
    return prep, prep.dataset(table)
