"""Cross-validation harness and evaluation artifacts (confusion, ROC, calibration)."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__, learners
from ._util import frozen
from .dataset import FoldPlan, LabeledDataset
from .errors import ParameterError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        counts = frozen(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ParameterError(f"confusion counts must be square, got {counts.shape}")
        if (counts < 0).any():
            raise ParameterError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts, self.class_names)

    def recall(self) -> list[float | None]:
        rows = self.counts.sum(axis=1)
        return [None if r == 0 else self.counts[i, i] / r for i, r in enumerate(rows)]

    def precision(self) -> list[float | None]:
        cols = self.counts.sum(axis=0)
        return [None if s == 0 else self.counts[i, i] / s for i, s in enumerate(cols)]

    def to_dict(self) -> dict:
        return {"class_names": list(self.class_names), "counts": self.counts.tolist()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["true\\predicted", *self.class_names])
        for name, row in zip(self.class_names, self.counts.tolist()):
            writer.writerow([name, *row])
        return buf.getvalue()


def confusion(y_true, y_pred, c: int, class_names: Sequence[str] | None = None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ParameterError(f"length mismatch: {y_true.size} true vs {y_pred.size} predicted")
    if y_true.size and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= c):
        raise ParameterError(f"class index outside [0, {c})")
    counts = np.bincount(y_true * c + y_pred, minlength=c * c).reshape(c, c)
    names = tuple(class_names) if class_names is not None else tuple(str(i) for i in range(c))
    return ConfusionMatrix(counts, names)


def accuracy(m: ConfusionMatrix) -> float:
    total = m.total
    if total == 0:
        raise ParameterError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(m.counts)) / total


# --------------------------------------------------------------------------
# ROC and calibration


@dataclass(frozen=True)
class RocCurve:
    """Points run from (0, 0) to (1, 1); ``thresholds[i]`` produces point ``i + 1``."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    class_index: int | None = None
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "class_index": self.class_index,
            "label": self.label,
            "thresholds": self.thresholds.tolist(),
            "fpr": self.fpr.tolist(),
            "tpr": self.tpr.tolist(),
            "auc": self.auc,
        }


def roc_points(scores, y_true, class_index: int | None = None, label: str = "") -> RocCurve:
    """ROC curve with one point per distinct score, highest threshold first.

    Tied scores move the curve diagonally, so AUC (trapezoid rule) credits
    ties with one half, like the Mann-Whitney statistic.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y_true).astype(bool)
    if scores.shape != y.shape:
        raise ParameterError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ParameterError("ROC undefined: labels contain a single class")
    order = np.argsort(-scores, kind="stable")
    s, yy = scores[order], y[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tps = np.cumsum(yy)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(frozen(s[last]), frozen(fpr), frozen(tpr), auc, class_index, label)


def roc_one_vs_rest(scores, labels, class_names: Sequence[str]) -> list[RocCurve]:
    """One curve per class that has both positives and negatives in ``labels``."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    curves = []
    for k, name in enumerate(class_names):
        positive = labels == k
        if positive.all() or not positive.any():
            continue
        curves.append(roc_points(scores[:, k], positive, k, name))
    return curves


def macro_auc(curves: Sequence[RocCurve]) -> float | None:
    return float(np.mean([c.auc for c in curves])) if curves else None


@dataclass(frozen=True)
class CalibrationCurve:
    edges: np.ndarray
    mean_score: np.ndarray      # NaN for empty bins
    observed_fraction: np.ndarray
    counts: np.ndarray

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0

    def to_dict(self) -> dict:
        def clean(a):
            return [None if np.isnan(v) else float(v) for v in a]

        return {
            "edges": self.edges.tolist(),
            "mean_score": clean(self.mean_score),
            "observed_fraction": clean(self.observed_fraction),
            "counts": self.counts.tolist(),
        }


def calibration(scores, y_true, bins: int = 10) -> CalibrationCurve:
    """Reliability curve over ``bins`` equal-width bins of [0, 1].

    Bins are left-closed except the last, which also takes score 1.0.
    """
    if bins < 2:
        raise ParameterError(f"bins must be >= 2, got {bins}")
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y_true).astype(float)
    if scores.shape != y.shape:
        raise ParameterError("scores and labels differ in length")
    if scores.size and (np.isnan(scores).any() or scores.min() < 0 or scores.max() > 1):
        raise ParameterError("calibration scores must lie in [0, 1]")
    index = np.minimum((scores * bins).astype(np.int64), bins - 1)
    counts = np.bincount(index, minlength=bins)
    sums = np.bincount(index, weights=scores, minlength=bins)
    hits = np.bincount(index, weights=y, minlength=bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / counts, np.nan)
        observed = np.where(counts > 0, hits / counts, np.nan)
    return CalibrationCurve(
        frozen(np.linspace(0.0, 1.0, bins + 1)), frozen(mean), frozen(observed), frozen(counts)
    )


# --------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class EvalReport:
    algorithm: str
    params: dict
    seed: int
    k: int
    fold_sizes: tuple[int, ...]
    fold_accuracies: tuple[float, ...]
    confusion: ConfusionMatrix
    truth: np.ndarray               # true class per row
    predictions: np.ndarray         # out-of-fold class per row
    scores: np.ndarray              # out-of-fold score matrix
    warnings: tuple[str, ...] = ()
    fold_runtimes: tuple[float, ...] = ()
    provenance: dict = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> float:
        """Pooled accuracy: trace of the aggregate matrix over its total."""
        return accuracy(self.confusion)

    @property
    def mean_fold_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.confusion.class_names

    def to_dict(self, include_timing: bool = False) -> dict:
        """JSON-ready form; timings are left out unless asked for, so the
        output is byte-stable across runs."""
        curves = roc_one_vs_rest(self.scores, self.truth, self.class_names)
        d = {
            "version": 1,
            "toolkit_version": __version__,
            "algorithm": self.algorithm,
            "params": self.params,
            "seed": self.seed,
            "k": self.k,
            "fold_sizes": list(self.fold_sizes),
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "mean_fold_accuracy": self.mean_fold_accuracy,
            "accuracy_definition": "pooled: trace(confusion) / total",
            "confusion": self.confusion.to_dict(),
            "per_class": {
                name: {"precision": p, "recall": r}
                for name, p, r in zip(self.class_names, self.confusion.precision(), self.confusion.recall())
            },
            "auc_one_vs_rest": {c.label: c.auc for c in curves},
            "macro_auc": macro_auc(curves),
            "warnings": list(self.warnings),
            "provenance": self.provenance,
        }
        if include_timing:
            d["fold_runtimes"] = list(self.fold_runtimes)
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2) + "\n"


# fold_fn(fold) -> (test rows, true labels, predictions, scores, warnings)
FoldFn = Callable[[int], tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[str]]]


def _run_folds(plan: FoldPlan, c: int, fold_fn: FoldFn, workers: int) -> list:
    def timed(f):
        start = time.perf_counter()
        out = fold_fn(f)
        return (*out, time.perf_counter() - start)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(timed, range(plan.k)))
    return [timed(f) for f in range(plan.k)]


def _assemble(algo, params, seed, plan, n, class_names, results, provenance) -> EvalReport:
    c = len(class_names)
    predictions = np.full(n, -1, dtype=np.int64)
    truth_all = np.full(n, -1, dtype=np.int64)
    scores = np.zeros((n, c))
    total = ConfusionMatrix(np.zeros((c, c), dtype=np.int64), class_names)
    accs, sizes, warnings, runtimes = [], [], [], []
    for rows, truth, pred, sc, warn, runtime in results:
        predictions[rows] = pred
        truth_all[rows] = truth
        scores[rows] = sc
        m = confusion(truth, pred, c, class_names)
        total = total + m
        sizes.append(int(rows.size))
        accs.append(accuracy(m) if rows.size else float("nan"))
        warnings.extend(warn)
        runtimes.append(runtime)
    if (predictions < 0).any():
        raise ParameterError("fold plan does not cover every row")
    return EvalReport(
        algorithm=algo,
        params=params,
        seed=seed,
        k=plan.k,
        fold_sizes=tuple(sizes),
        fold_accuracies=tuple(accs),
        confusion=total,
        truth=frozen(truth_all),
        predictions=frozen(predictions),
        scores=frozen(scores),
        warnings=tuple(warnings),
        fold_runtimes=tuple(runtimes),
        provenance=dict(provenance or {}),
    )


def _fold_warnings(fold: int, train_labels: np.ndarray, class_names, model) -> list[str]:
    out = []
    present = set(np.unique(train_labels).tolist())
    missing = [class_names[i] for i in range(len(class_names)) if i not in present]
    if missing:
        out.append(f"fold {fold}: training rows lack classes {missing}")
    if getattr(model, "converged", True) is False:
        out.append(f"fold {fold}: SVM hit max_passes before meeting the KKT tolerance")
    return out


def cross_validate(
    data: LabeledDataset,
    algo: str,
    params: dict | None = None,
    plan: FoldPlan | None = None,
    seed: int | None = None,
    workers: int = 1,
    provenance: dict | None = None,
) -> EvalReport:
    """k-fold cross-validation of one algorithm on an already-encoded dataset.

    Fold ``f`` trains on every row assigned elsewhere and predicts the rows
    assigned to ``f``.  The model seed defaults to the plan seed.
    """
    if plan is None:
        raise ParameterError("cross_validate needs a FoldPlan")
    if plan.n != data.n_rows:
        raise ParameterError(f"fold plan covers {plan.n} rows, dataset has {data.n_rows}")
    params = learners.resolve_params(algo, params)
    seed = plan.seed if seed is None else seed

    def run(f):
        train, test = data.subset(plan.train_indices(f)), data.subset(plan.test_indices(f))
        model = learners.fit(algo, train, params, seed)
        x = learners.model_input(model, test)
        warn = _fold_warnings(f, train.labels, data.class_names, model)
        return plan.test_indices(f), test.labels, model.predict(x), model.predict_scores(x), warn

    results = _run_folds(plan, data.n_classes, run, workers)
    return _assemble(algo, params, seed, plan, data.n_rows, data.class_names, results, provenance)


def cross_validate_per_fold(
    fit_fold: Callable[[np.ndarray, np.ndarray], tuple[LabeledDataset, LabeledDataset]],
    class_names: Sequence[str],
    algo: str,
    params: dict | None,
    plan: FoldPlan,
    seed: int | None = None,
    workers: int = 1,
    provenance: dict | None = None,
) -> EvalReport:
    """Cross-validation where preprocessing is refit inside every fold.

    ``fit_fold(train_rows, test_rows)`` must return the encoded training and
    test datasets built from statistics of the training rows only.
    """
    params = learners.resolve_params(algo, params)
    seed = plan.seed if seed is None else seed
    class_names = tuple(class_names)

    def run(f):
        train_rows, test_rows = plan.train_indices(f), plan.test_indices(f)
        train, test = fit_fold(train_rows, test_rows)
        model = learners.fit(algo, train, params, seed)
        x = learners.model_input(model, test)
        warn = _fold_warnings(f, train.labels, class_names, model)
        return test_rows, test.labels, model.predict(x), model.predict_scores(x), warn

    results = _run_folds(plan, len(class_names), run, workers)
    return _assemble(algo, params, seed, plan, plan.n, class_names, results, provenance)
