"""Linear discriminant analysis via whitening of the pooled within-class covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._util import frozen
from ..dataset import LabeledDataset
from ..errors import ParameterError
from .base import Model, decode_floats, encode_floats, register, softmax_rows, training_arrays


@register
@dataclass(frozen=True, kw_only=True)
class LdaModel(Model):
    variant = "lda"

    class_means: np.ndarray        # (c, d)
    eigenvectors: np.ndarray       # (d, d), columns
    eigenvalues: np.ndarray        # (d,), after flooring
    log_priors: np.ndarray
    eigen_floor_value: float

    @property
    def whitening(self) -> np.ndarray:
        """``W = diag(lambda)^(-1/2) V^T``."""
        return self.eigenvectors.T / np.sqrt(self.eigenvalues)[:, None]

    @property
    def transformed_centroids(self) -> np.ndarray:
        return self.class_means @ self.whitening.T

    def regularized_covariance(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T

    def discriminants(self, x) -> np.ndarray:
        """``-1/2 ||W (x - mu_k)||^2 + log pi_k`` for every row and class."""
        values = self._check_x(x)
        z = values @ self.whitening.T
        centroids = self.transformed_centroids
        out = np.empty((values.shape[0], self.class_count))
        for k in range(self.class_count):
            diff = z - centroids[k]
            out[:, k] = -0.5 * np.einsum("ij,ij->i", diff, diff) + self.log_priors[k]
        return out

    def predict_scores(self, x) -> np.ndarray:
        delta = self.discriminants(x)
        return softmax_rows(delta) if delta.shape[0] else delta

    def predict(self, x) -> np.ndarray:
        delta = self.discriminants(x)
        return np.argmax(delta, axis=1).astype(np.int64) if delta.shape[0] else np.zeros(0, np.int64)

    def _payload(self) -> dict:
        return {
            "class_means": self.class_means.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "log_priors": encode_floats(self.log_priors),
            "eigen_floor_value": self.eigen_floor_value,
        }

    @classmethod
    def _from_payload(cls, d: dict, common: dict) -> "LdaModel":
        dim = common["feature_count"]
        return cls(
            class_means=frozen(np.array(d["class_means"], dtype=float).reshape(-1, dim)),
            eigenvectors=frozen(np.array(d["eigenvectors"], dtype=float).reshape(dim, dim)),
            eigenvalues=frozen(d["eigenvalues"], float),
            log_priors=frozen(decode_floats(d["log_priors"])),
            eigen_floor_value=float(d["eigen_floor_value"]),
            **common,
        )


def fit_lda(data: LabeledDataset, eigen_floor: float = 1e-6, seed: int = 0) -> LdaModel:
    """Fit LDA with empirical priors and eigenvalue flooring.

    The pooled within-class covariance is decomposed through the SVD of the
    class-centered data.  Eigenvalues below ``eigen_floor * trace / d`` are
    raised to that value, which keeps the whitening finite when the
    covariance is singular.
    """
    if eigen_floor <= 0:
        raise ParameterError("eigen_floor must be positive")
    x, y = training_arrays(data)
    n, d = x.shape
    c = data.n_classes
    counts = np.bincount(y, minlength=c)
    means = np.zeros((c, d))
    for k in np.flatnonzero(counts):
        means[k] = x[y == k].mean(axis=0)
    centered = x - means[y]
    dof = n - np.count_nonzero(counts)
    scaled = centered / np.sqrt(dof if dof > 0 else n)
    _, s, vt = np.linalg.svd(scaled, full_matrices=n < d)
    eigenvalues = np.zeros(d)
    eigenvalues[: s.size] = s ** 2
    trace = eigenvalues.sum()
    floor = eigen_floor * trace / d if trace > 0 else eigen_floor
    with np.errstate(divide="ignore"):
        log_priors = np.log(counts / n)
    return LdaModel(
        class_count=c,
        feature_count=d,
        params={"solver": "svd", "eigen_floor": eigen_floor, "shrinkage": None, "priors": "empirical"},
        seed=seed,
        class_means=frozen(means),
        eigenvectors=frozen(vt.T),
        eigenvalues=frozen(np.maximum(eigenvalues, floor)),
        log_priors=frozen(log_priors),
        eigen_floor_value=float(floor),
    )
