"""The six supervised classifiers behind one fit/predict/score interface."""

from __future__ import annotations

import json

from ..dataset import LabeledDataset
from ..errors import ParameterError
from .base import Model, model_from_dict
from .knn import KnnModel, fit_knn
from .lda import LdaModel, fit_lda
from .naive_bayes import MIXED, NaiveBayesModel, fit_naive_bayes
from .svm import SvmModel, fit_svm
from .tree import DecisionTreeModel, RandomForestModel, fit_decision_tree, fit_random_forest

FITTERS = {
    "nb": fit_naive_bayes,
    "dt": fit_decision_tree,
    "rf": fit_random_forest,
    "svm": fit_svm,
    "knn": fit_knn,
    "lda": fit_lda,
}

ALGORITHMS = tuple(FITTERS)

DEFAULT_PARAMS = {
    "nb": {"mode": "gaussian", "var_smoothing": 1e-9, "alpha": 1.0},
    "dt": {},
    "rf": {"trees": 10, "bootstrap": True, "max_features": None},
    "svm": {"c": 1.0, "gamma": 0.0, "coef0": 0.0, "tol": 1e-3, "max_passes": 200},
    "knn": {"k": 3},
    "lda": {"eigen_floor": 1e-6},
}

ALGORITHM_NAMES = {
    "nb": "Naive Bayes",
    "dt": "Decision Tree",
    "rf": "Random Forest",
    "svm": "SVM",
    "knn": "KNN",
    "lda": "LDA",
}


def resolve_params(algo: str, overrides: dict | None = None) -> dict:
    """Defaults for ``algo`` updated with ``overrides``; unknown keys are an error."""
    if algo not in FITTERS:
        raise ParameterError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    params = dict(DEFAULT_PARAMS[algo])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ParameterError(f"{algo} has no parameter {key!r}")
        params[key] = value
    return params


def fit(algo: str, data: LabeledDataset, params: dict | None = None, seed: int = 0) -> Model:
    return FITTERS[algo](data, **resolve_params(algo, params), seed=seed)


def model_input(model: Model, data: LabeledDataset):
    """What ``model.predict`` consumes for ``data``: the feature matrix, or the
    source table for mixed-mode naive Bayes."""
    if isinstance(model, NaiveBayesModel) and model.mode == MIXED:
        return data.source
    return data.features


def predict(model: Model, x):
    return model.predict(x)


def predict_scores(model: Model, x):
    return model.predict_scores(x)


def dumps(model: Model) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


def loads(text: str) -> Model:
    return model_from_dict(json.loads(text))


__all__ = [
    "ALGORITHMS",
    "DEFAULT_PARAMS",
    "DecisionTreeModel",
    "KnnModel",
    "LdaModel",
    "Model",
    "NaiveBayesModel",
    "RandomForestModel",
    "SvmModel",
    "dumps",
    "fit",
    "fit_decision_tree",
    "fit_knn",
    "fit_lda",
    "fit_naive_bayes",
    "fit_random_forest",
    "fit_svm",
    "loads",
    "model_from_dict",
    "model_input",
    "predict",
    "predict_scores",
    "resolve_params",
]
