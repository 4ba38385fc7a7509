"""Naive Bayes with Gaussian class-conditionals, optionally mixed with
Laplace-smoothed categorical tables taken from the source :class:`Table`."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dataset import LabeledDataset, Table
from ..errors import ParameterError
from .base import Model, decode_floats, encode_floats, register, softmax_rows, training_arrays

GAUSSIAN = "gaussian"
MIXED = "mixed"
MODES = (GAUSSIAN, MIXED)

_LOG_2PI = math.log(2.0 * math.pi)


def _gaussian_stats(x: np.ndarray, y: np.ndarray, c: int, var_smoothing: float):
    d = x.shape[1]
    counts = np.bincount(y, minlength=c)
    means = np.zeros((c, d))
    variances = np.zeros((c, d))
    for k in range(c):
        rows = x[y == k]
        if rows.shape[0]:
            means[k] = rows.mean(axis=0)
            variances[k] = ((rows - means[k]) ** 2).mean(axis=0)
    spread = float(x.var(axis=0).max()) if x.size else 0.0
    epsilon = var_smoothing * spread if spread > 0 else var_smoothing
    return counts, means, variances + epsilon, epsilon


def _gaussian_loglik(x: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    # (n, c): sum over features of log N(x_j; mu_kj, var_kj)
    out = np.empty((x.shape[0], means.shape[0]))
    for k in range(means.shape[0]):
        z = (x - means[k]) ** 2 / variances[k]
        out[:, k] = -0.5 * (np.sum(_LOG_2PI + np.log(variances[k])) + z.sum(axis=1))
    return out


@register
@dataclass(frozen=True, kw_only=True)
class NaiveBayesModel(Model):
    variant = "nb"

    mode: str
    log_priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    epsilon: float
    class_counts: np.ndarray
    # mixed mode only
    continuous_columns: tuple[str, ...] = ()
    categorical_tables: dict = field(default_factory=dict)

    def joint_log_likelihood(self, x) -> np.ndarray:
        if self.mode == MIXED:
            return self._mixed_jll(x)
        values = self._check_x(x)
        return _gaussian_loglik(values, self.means, self.variances) + self.log_priors

    def _mixed_jll(self, table: Table) -> np.ndarray:
        if not isinstance(table, Table):
            raise ParameterError("mixed-mode naive Bayes predicts from a Table")
        n = table.n_rows
        jll = np.tile(self.log_priors, (n, 1))
        if self.continuous_columns:
            x = np.column_stack([table.column(name) for name in self.continuous_columns])
            observed = ~np.isnan(x)
            for k in range(self.class_count):
                z = (np.where(observed, x, self.means[k]) - self.means[k]) ** 2 / self.variances[k]
                terms = _LOG_2PI + np.log(self.variances[k]) + z
                jll[:, k] += -0.5 * np.where(observed, terms, 0.0).sum(axis=1)
        for name, (categories, log_probs) in self.categorical_tables.items():
            index = {v: i for i, v in enumerate(categories)}
            for row, value in enumerate(table.column(name)):
                j = index.get(value)
                # unseen or missing categories carry no evidence
                if j is not None:
                    jll[row] += log_probs[:, j]
        return jll

    def log_posterior(self, x) -> np.ndarray:
        """Normalized log class posteriors (log-sum-exp over classes)."""
        jll = self.joint_log_likelihood(x)
        if jll.shape[0] == 0:
            return jll
        top = jll.max(axis=1, keepdims=True)
        return jll - (top + np.log(np.exp(jll - top).sum(axis=1, keepdims=True)))

    def predict_scores(self, x) -> np.ndarray:
        jll = self.joint_log_likelihood(x)
        if jll.shape[0] == 0:
            return np.zeros((0, self.class_count))
        return softmax_rows(jll)

    def predict(self, x) -> np.ndarray:
        jll = self.joint_log_likelihood(x)
        return np.argmax(jll, axis=1).astype(np.int64) if jll.shape[0] else np.zeros(0, np.int64)

    def _payload(self) -> dict:
        return {
            "mode": self.mode,
            "log_priors": encode_floats(self.log_priors),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "epsilon": self.epsilon,
            "class_counts": self.class_counts.tolist(),
            "continuous_columns": list(self.continuous_columns),
            "categorical_tables": {
                name: {"categories": list(cats), "log_probs": probs.tolist()}
                for name, (cats, probs) in self.categorical_tables.items()
            },
        }

    @classmethod
    def _from_payload(cls, d: dict, common: dict) -> "NaiveBayesModel":
        return cls(
            mode=d["mode"],
            log_priors=decode_floats(d["log_priors"]),
            means=np.array(d["means"], dtype=float),
            variances=np.array(d["variances"], dtype=float),
            epsilon=float(d["epsilon"]),
            class_counts=np.array(d["class_counts"], dtype=np.int64),
            continuous_columns=tuple(d.get("continuous_columns", ())),
            categorical_tables={
                name: (tuple(t["categories"]), np.array(t["log_probs"], dtype=float))
                for name, t in d.get("categorical_tables", {}).items()
            },
            **common,
        )


def fit_naive_bayes(
    data: LabeledDataset,
    mode: str = GAUSSIAN,
    var_smoothing: float = 1e-9,
    alpha: float = 1.0,
    seed: int = 0,
) -> NaiveBayesModel:
    """Fit class priors and per-class likelihoods.

    Parameters
    ----------
    mode : {"gaussian", "mixed"}
        ``"gaussian"`` models every column of the feature matrix as normal.
        ``"mixed"`` works on ``data.source``: continuous columns are
        Gaussian, categorical columns get frequency tables.
    var_smoothing : float
        Added to every variance, as a fraction of the largest column variance.
    alpha : float
        Laplace pseudo-count for categorical tables.
    """
    if mode not in MODES:
        raise ParameterError(f"naive Bayes mode must be one of {MODES}, got {mode!r}")
    if var_smoothing <= 0:
        raise ParameterError("var_smoothing must be positive")
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    c = data.n_classes
    y = data.labels
    params = {"mode": mode, "var_smoothing": var_smoothing, "alpha": alpha}

    if mode == GAUSSIAN:
        x, _ = training_arrays(data)
        continuous, tables = (), {}
    else:
        table = data.source
        if table is None:
            raise ParameterError("mixed-mode naive Bayes needs the source table")
        if table.total_missing:
            raise ParameterError("mixed-mode naive Bayes needs an imputed source table")
        continuous = table.continuous_names
        if not table.columns:
            raise ParameterError("source table has no columns")
        x = (np.column_stack([table.column(n) for n in continuous]) if continuous
             else np.zeros((data.n_rows, 0)))
        tables = {}
        counts_per_class = np.bincount(y, minlength=c)
        for name in table.categorical_names:
            column = table.column(name)
            categories = tuple(sorted(set(column)))
            index = {v: i for i, v in enumerate(categories)}
            counts = np.zeros((c, len(categories)))
            for value, label in zip(column, y):
                counts[label, index[value]] += 1
            denom = counts_per_class[:, None] + alpha * len(categories)
            tables[name] = (categories, np.log((counts + alpha) / denom))

    counts, means, variances, epsilon = _gaussian_stats(x, y, c, var_smoothing)
    with np.errstate(divide="ignore"):
        log_priors = np.log(counts / counts.sum())
    return NaiveBayesModel(
        class_count=c,
        feature_count=data.features.shape[1],
        params=params,
        seed=seed,
        mode=mode,
        log_priors=log_priors,
        means=means,
        variances=variances,
        epsilon=epsilon,
        class_counts=counts,
        continuous_columns=tuple(continuous),
        categorical_tables=tables,
    )
