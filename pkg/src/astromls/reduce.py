"""Standardization and principal component analysis."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._util import frozen
from .dataset import FeatureMatrix
from .errors import ParameterError, SchemaError

STANDARDIZE_VARIANCE_RATIO = 10.0


def _matrix(x) -> np.ndarray:
    return x.values if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Scaler:
    means: np.ndarray
    stdevs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", frozen(self.means, dtype=float))
        object.__setattr__(self, "stdevs", frozen(self.stdevs, dtype=float))

    def transform(self, x):
        """``(x - mean) / stdev``; constant columns map to 0."""
        values = _matrix(x)
        if values.ndim != 2 or values.shape[1] != self.means.size:
            raise ParameterError(f"expected {self.means.size} columns, got shape {values.shape}")
        safe = np.where(self.stdevs > 0, self.stdevs, 1.0)
        out = np.where(self.stdevs > 0, (values - self.means) / safe, 0.0)
        if isinstance(x, FeatureMatrix):
            return FeatureMatrix(out, x.feature_names)
        return out

    def to_dict(self) -> dict:
        return {"version": 1, "means": self.means.tolist(), "stdevs": self.stdevs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["means"], dtype=float), np.array(d["stdevs"], dtype=float))


def fit_scaler(x) -> Scaler:
    """Column means and population (denominator ``n``) standard deviations."""
    values = _matrix(x)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ParameterError("cannot fit a scaler on an empty matrix")
    means = values.mean(axis=0)
    stdevs = np.sqrt(((values - means) ** 2).mean(axis=0))
    # columns that are constant up to rounding get exactly zero spread
    const = np.all(values == values[0], axis=0)
    stdevs[const] = 0.0
    return Scaler(means, stdevs)


def should_standardize(x, ratio: float = STANDARDIZE_VARIANCE_RATIO) -> bool:
    """True when two non-constant columns' variances differ by more than ``ratio``.

    Zero-variance columns (e.g. unused hash buckets) are ignored.
    """
    var = _matrix(x).var(axis=0)
    var = var[var > 0]
    return var.size >= 2 and var.max() > ratio * var.min()


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    n_samples: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mean", frozen(self.mean, dtype=float))
        object.__setattr__(self, "components", frozen(np.atleast_2d(self.components), dtype=float))
        object.__setattr__(self, "explained_variance", frozen(self.explained_variance, dtype=float))

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def transform(self, x):
        return pca_transform(self, x)

    def inverse_transform(self, scores) -> np.ndarray:
        return _matrix(scores) @ self.components + self.mean

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "n_samples": self.n_samples,
            "variance_denominator": "n-1",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        if d.get("version") != 1:
            raise SchemaError(f"unsupported PCA model version {d.get('version')!r}")
        return cls(
            np.array(d["mean"], dtype=float),
            np.array(d["components"], dtype=float),
            np.array(d["explained_variance"], dtype=float),
            int(d.get("n_samples", 0)),
        )


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # largest-magnitude loading positive; argmax returns the earliest on ties
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(components.shape[0]), pivots])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def fit_pca(x, r: int) -> PcaModel:
    """Top-``r`` principal directions via SVD of the centered data matrix.

    ``explained_variance`` uses the ``n - 1`` denominator.
    """
    values = _matrix(x)
    if values.ndim != 2:
        raise ParameterError(f"expected a 2-D matrix, got shape {values.shape}")
    n, d = values.shape
    if n < 2:
        raise ParameterError("PCA needs at least two rows")
    if not 1 <= r <= min(n - 1, d):
        raise ParameterError(f"target dimension {r} outside [1, {min(n - 1, d)}]")
    mean = values.mean(axis=0)
    centered = values - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = _fix_signs(vt[:r])
    explained = s[:r] ** 2 / (n - 1)
    return PcaModel(mean, components, explained, n)


def pca_transform(m: PcaModel, x):
    values = _matrix(x)
    if values.ndim != 2 or values.shape[1] != m.mean.size:
        raise ParameterError(f"expected {m.mean.size} columns, got shape {values.shape}")
    scores = (values - m.mean) @ m.components.T
    if isinstance(x, FeatureMatrix):
        return FeatureMatrix(scores, tuple(f"pc{j + 1}" for j in range(m.n_components)))
    return scores
