from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._util import frozen
from ..dataset import LabeledDataset
from ..errors import ParameterError
from .base import Model, register, training_arrays

# cap on the size of the (queries x train x features) difference block
_BLOCK_ELEMENTS = 4_000_000


@register
@dataclass(frozen=True, kw_only=True)
class KnnModel(Model):
    """Lazy k-nearest-neighbour classifier (Euclidean, uniform weights).

    Neighbours are ranked by distance, then by training row index.  A vote
    tie goes to whichever tied class owns the nearest neighbour.
    """

    variant = "knn"

    k: int
    train_x: np.ndarray
    train_y: np.ndarray

    def neighbors(self, x) -> np.ndarray:
        """Indices of the ``k`` nearest training rows for each query, nearest first."""
        values = self._check_x(x)
        n_train, d = self.train_x.shape
        out = np.empty((values.shape[0], self.k), dtype=np.int64)
        step = max(1, _BLOCK_ELEMENTS // max(1, n_train * d))
        for start in range(0, values.shape[0], step):
            block = values[start:start + step]
            diff = block[:, None, :] - self.train_x[None, :, :]
            dist = np.einsum("qnd,qnd->qn", diff, diff)
            order = np.argsort(dist, axis=1, kind="stable")
            out[start:start + step] = order[:, : self.k]
        return out

    def _votes(self, x):
        nbrs = self.neighbors(x)
        labels = self.train_y[nbrs]
        votes = np.zeros((labels.shape[0], self.class_count))
        for col in range(self.k):
            votes[np.arange(labels.shape[0]), labels[:, col]] += 1
        return labels, votes

    def predict_scores(self, x) -> np.ndarray:
        _, votes = self._votes(x)
        return votes / self.k

    def predict(self, x) -> np.ndarray:
        labels, votes = self._votes(x)
        out = np.empty(labels.shape[0], dtype=np.int64)
        for row in range(labels.shape[0]):
            top = votes[row].max()
            for label in labels[row]:
                if votes[row, label] == top:
                    out[row] = label
                    break
        return out

    def _payload(self) -> dict:
        return {"k": self.k, "train_x": self.train_x.tolist(), "train_y": self.train_y.tolist()}

    @classmethod
    def _from_payload(cls, d: dict, common: dict) -> "KnnModel":
        train_x = np.array(d["train_x"], dtype=float).reshape(-1, common["feature_count"])
        return cls(k=int(d["k"]), train_x=frozen(train_x), train_y=frozen(d["train_y"], np.int64),
                   **common)


def fit_knn(data: LabeledDataset, k: int = 3, seed: int = 0) -> KnnModel:
    x, y = training_arrays(data)
    if not 1 <= k <= x.shape[0]:
        raise ParameterError(f"k must lie in [1, {x.shape[0]}], got {k}")
    return KnnModel(
        class_count=data.n_classes,
        feature_count=x.shape[1],
        params={"k": k, "metric": "euclidean", "weights": "uniform"},
        seed=seed,
        k=k,
        train_x=frozen(x),
        train_y=frozen(y, np.int64),
    )
