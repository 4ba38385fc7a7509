from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ..dataset import FeatureMatrix, LabeledDataset
from ..errors import ParameterError, SchemaError

MODEL_FORMAT_VERSION = 1

_REGISTRY: dict[str, type["Model"]] = {}


def register(cls):
    _REGISTRY[cls.variant] = cls
    return cls


@dataclass(frozen=True, kw_only=True)
class Model:
    """Common surface of every trained classifier.

    Subclasses implement :meth:`predict_scores` (an ``n x c`` matrix) and the
    ``_payload``/``_from_payload`` serialization pair.  :meth:`predict`
    defaults to the row-wise argmax, which resolves ties to the lowest class
    index.
    """

    variant: ClassVar[str] = ""

    class_count: int
    feature_count: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def _check_x(self, x) -> np.ndarray:
        values = x.values if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=float)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, self.feature_count)
        if values.ndim != 2 or values.shape[1] != self.feature_count:
            raise ParameterError(
                f"model expects {self.feature_count} features, got input of shape {values.shape}"
            )
        return values

    def predict_scores(self, x) -> np.ndarray:
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        scores = self.predict_scores(x)
        return np.argmax(scores, axis=1).astype(np.int64) if scores.shape[0] else np.zeros(0, np.int64)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "variant": self.variant,
            "class_count": self.class_count,
            "feature_count": self.feature_count,
            "params": self.params,
            "seed": self.seed,
            **self._payload(),
        }

    def _payload(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_payload(cls, d: dict, common: dict) -> "Model":
        raise NotImplementedError


def model_from_dict(d: dict) -> Model:
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise SchemaError(f"unsupported model version {d.get('version')!r}")
    try:
        cls = _REGISTRY[d["variant"]]
    except KeyError:
        raise SchemaError(f"unknown model variant {d.get('variant')!r}") from None
    common = {
        "class_count": int(d["class_count"]),
        "feature_count": int(d["feature_count"]),
        "params": dict(d.get("params", {})),
        "seed": int(d.get("seed", 0)),
    }
    return cls._from_payload(d, common)


def training_arrays(data: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    x = data.features.values
    if x.shape[1] == 0:
        raise ParameterError("dataset has no feature columns")
    return x, data.labels


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-normalized ``exp``; ``-inf`` entries become exact zeros."""
    top = logits.max(axis=1, keepdims=True)
    z = np.exp(logits - top)
    return z / z.sum(axis=1, keepdims=True)


def encode_floats(a) -> list:
    """Nested list with ``-inf`` written as ``None`` (strict JSON has no infinities)."""
    arr = np.asarray(a, dtype=float)
    return [None if np.isneginf(v) else float(v) for v in arr.ravel()] if arr.ndim == 1 else [
        encode_floats(row) for row in arr
    ]


def decode_floats(values) -> np.ndarray:
    def conv(v):
        if isinstance(v, list):
            return [conv(u) for u in v]
        return -np.inf if v is None else float(v)

    return np.array(conv(values), dtype=float)

