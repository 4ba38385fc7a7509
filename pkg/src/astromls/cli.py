"""Command-line front end: ``astromls {schema,cv,train,predict,pca,plot}``.

Exit codes: 0 success, 1 usage error, 2 data or I/O error.  Every output
file records the toolkit version, the resolved configuration and the seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, learners
from .dataset import (
    DEFAULT_HASH_DIMS,
    DEFAULT_MISSING_TOKENS,
    LabeledDataset,
    Table,
    apply_imputation,
    coerce_to_schema,
    hash_features,
    imputation_values,
    infer_schema,
    label_strings,
    load_csv,
    make_folds,
)
from .errors import AstromlsError, ParameterError
from .evaluation import (
    EvalReport,
    calibration,
    cross_validate,
    cross_validate_per_fold,
    roc_one_vs_rest,
)
from .pipeline import Preprocessor, PrepConfig, class_names_of, fit_preprocessing
from .reduce import fit_pca, fit_scaler, pca_transform, should_standardize
from . import visualize

SEED_ENV = "ASTROMLS_SEED"
DEFAULT_OUT = "astromls_out"
PLOT_KINDS = ("scatter", "andrews", "radviz", "hexbin", "confusion", "roc", "calibration")

# flag dest -> learner parameter name, per algorithm
_OVERRIDES = {
    "k": ("knn", "k"),
    "trees": ("rf", "trees"),
    "bootstrap": ("rf", "bootstrap"),
    "max_features": ("rf", "max_features"),
    "c": ("svm", "c"),
    "gamma": ("svm", "gamma"),
    "coef0": ("svm", "coef0"),
    "tol": ("svm", "tol"),
    "max_passes": ("svm", "max_passes"),
    "alpha": ("nb", "alpha"),
    "var_smoothing": ("nb", "var_smoothing"),
    "nb_mode": ("nb", "mode"),
    "eigen_floor": ("lda", "eigen_floor"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _max_features(text: str):
    return text if text == "sqrt" else _positive_int(text)


def _seed(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None


# --------------------------------------------------------------------------
# parser


def _add_input(p, label_required=True):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--label", required=label_required, default=None, help="label column name")
    p.add_argument("--missing-tokens", default=None,
                   help="comma-separated cells treated as missing (default: '', '?', 'NA')")
    p.add_argument("--numeric-threshold", type=float, default=1.0,
                   help="share of numeric cells for a continuous column (default 1.0)")


def _add_prep(p):
    p.add_argument("--hash-dims", type=_positive_int, default=DEFAULT_HASH_DIMS,
                   help=f"feature-hashing width (default {DEFAULT_HASH_DIMS})")
    p.add_argument("--pca", type=_positive_int, default=None, help="reduce to this many components")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None,
                   help="z-score features (default: auto, only before PCA)")


def _add_seed_out(p):
    p.add_argument("--seed", type=_seed, default=None,
                   help=f"random seed (default: ${SEED_ENV}, else 0)")
    p.add_argument("--out", default=DEFAULT_OUT, help=f"output directory (default {DEFAULT_OUT})")


def _add_algo(p, required=True):
    p.add_argument("--algo", choices=learners.ALGORITHMS, required=required, default=None)
    g = p.add_argument_group("hyperparameter overrides")
    g.add_argument("--k", type=_positive_int, help="KNN neighbours (default 3)")
    g.add_argument("--trees", type=_positive_int, help="random forest size (default 10)")
    g.add_argument("--bootstrap", action=argparse.BooleanOptionalAction, default=None,
                   help="random forest bootstrap resampling (default on)")
    g.add_argument("--max-features", type=_max_features,
                   help="random forest features per split: 'sqrt' or an integer (default all)")
    g.add_argument("--c", type=float, help="SVM penalty C (default 1.0)")
    g.add_argument("--gamma", type=float, help="RBF gamma; <= 0 means 1/n_features (default)")
    g.add_argument("--coef0", type=float, help="SVM coef0, recorded only (default 0)")
    g.add_argument("--tol", type=float, help="SVM KKT tolerance (default 1e-3)")
    g.add_argument("--max-passes", type=_positive_int, help="SVM pass cap (default 200)")
    g.add_argument("--alpha", type=float, help="naive Bayes Laplace smoothing (default 1.0)")
    g.add_argument("--var-smoothing", type=float, help="naive Bayes variance floor (default 1e-9)")
    g.add_argument("--nb-mode", choices=("gaussian", "mixed"), help="naive Bayes likelihood model")
    g.add_argument("--eigen-floor", type=float, help="LDA eigenvalue floor (default 1e-6)")


def _add_cv(p):
    p.add_argument("--folds", type=_positive_int, default=10, help="k for k-fold CV (default 10)")
    p.add_argument("--stratified", action=argparse.BooleanOptionalAction, default=True,
                   help="stratify folds by class (default on)")
    p.add_argument("--per-fold-prep", action="store_true",
                   help="refit imputation/scaling/PCA inside each training fold")
    p.add_argument("--workers", type=_positive_int, default=1, help="folds run in parallel")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="astromls", description="Classical ML toolkit for astronomical tables.")
    parser.add_argument("--version", action="version", version=f"astromls {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("schema", help="print the inferred column types as JSON")
    _add_input(p, label_required=False)
    p.add_argument("--out", default=None, help="also write schema.json into this directory")

    p = sub.add_parser("cv", help="k-fold cross-validation of one algorithm")
    _add_input(p)
    _add_prep(p)
    _add_algo(p)
    _add_cv(p)
    _add_seed_out(p)

    p = sub.add_parser("train", help="fit preprocessing and a model, write model.json")
    _add_input(p)
    _add_prep(p)
    _add_algo(p)
    _add_seed_out(p)

    p = sub.add_parser("predict", help="apply a trained model.json to a CSV")
    p.add_argument("--model", required=True, help="model.json written by 'train'")
    p.add_argument("--input", required=True)
    p.add_argument("--missing-tokens", default=None)
    p.add_argument("--out", default=DEFAULT_OUT)

    p = sub.add_parser("pca", help="project features onto principal components")
    _add_input(p, label_required=False)
    p.add_argument("--hash-dims", type=_positive_int, default=DEFAULT_HASH_DIMS)
    p.add_argument("--pca", type=_positive_int, required=True, help="number of components")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None)
    _add_seed_out(p)

    p = sub.add_parser("plot", help="write an SVG visualization")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    _add_input(p)
    _add_prep(p)
    _add_algo(p, required=False)
    _add_cv(p)
    _add_seed_out(p)
    p.add_argument("--grid", type=_positive_int, default=visualize.DEFAULT_GRID,
                   help="decision-region grid resolution for scatter")
    p.add_argument("--bins", type=_positive_int, default=10, help="calibration bins")
    p.add_argument("--resolution", type=_positive_int, default=101, help="Andrews curve samples")
    p.add_argument("--hex-radius", type=float, default=12.0, help="hexbin radius in pixels")
    p.add_argument("--palette", choices=sorted(visualize.PALETTES), default="set1")
    return parser


# --------------------------------------------------------------------------
# shared plumbing


def resolve_seed(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env, 0)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _missing_tokens(text: str | None):
    if text is None:
        return DEFAULT_MISSING_TOKENS
    return frozenset(t.strip() for t in text.split(","))


def _read(args):
    data = Path(args.input).read_bytes()
    raw = load_csv(data, _missing_tokens(args.missing_tokens))
    return raw, hashlib.sha256(data).hexdigest()


def _input_config(args, digest) -> dict:
    return {
        "input": str(args.input),
        "input_sha256": digest,
        "label": getattr(args, "label", None),
        "missing_tokens": sorted(_missing_tokens(args.missing_tokens)),
        "numeric_threshold": getattr(args, "numeric_threshold", None),
    }


def _overrides(args, algo: str) -> dict:
    out = {}
    for dest, (owner, param) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if owner != algo:
            raise UsageError(f"--{dest.replace('_', '-')} does not apply to --algo {algo}")
        out[param] = value
    return out


def _prep_config(args) -> PrepConfig:
    return PrepConfig(args.label, args.hash_dims, True, args.standardize, args.pca)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _csv_header(config: dict) -> str:
    return f"# astromls {__version__} config={json.dumps(config, sort_keys=True)}\n"


def _labeled_table(table: Table, label: str) -> Table:
    """``table`` without the rows whose label is missing."""
    text = label_strings(table, label)
    kept = [i for i, v in enumerate(text) if v is not None]
    return table if len(kept) == table.n_rows else table.take(kept)


def _run_cv(args, table: Table, config: dict, seed: int, algo: str, params: dict) -> EvalReport:
    cfg = _prep_config(args)
    provenance = {"config": config}
    if args.per_fold_prep:
        table = _labeled_table(table, args.label)
        class_names = class_names_of(table, args.label)
        index = {n: i for i, n in enumerate(class_names)}
        labels = np.array([index[v] for v in label_strings(table, args.label)], dtype=np.int64)
        plan = make_folds(labels, args.folds, seed, args.stratified)

        def fit_fold(train_rows, test_rows):
            prep, train = fit_preprocessing(table.take(train_rows), cfg, class_names)
            return train, prep.dataset(table.take(test_rows))

        return cross_validate_per_fold(fit_fold, class_names, algo, params, plan, seed,
                                       args.workers, provenance)
    _, data = fit_preprocessing(table, cfg)
    plan = make_folds(data.labels, args.folds, seed, args.stratified)
    return cross_validate(data, algo, params, plan, seed, args.workers, provenance)


def _base_config(args, digest, seed, **extra) -> dict:
    config = {"command": args.command, **_input_config(args, digest), "seed": seed}
    config.update(extra)
    return config


# --------------------------------------------------------------------------
# subcommands


def cmd_schema(args) -> int:
    raw, digest = _read(args)
    table = infer_schema(raw, args.numeric_threshold)
    doc = {
        "toolkit_version": __version__,
        "config": {"command": "schema", **_input_config(args, digest)},
        "n_rows": table.n_rows,
        "columns": [c.to_dict() for c in table.columns],
    }
    text = _dump(doc)
    sys.stdout.write(text)
    if args.out is not None:
        _write(_out_dir(args) / "schema.json", text)
    return 0


def cmd_cv(args) -> int:
    seed = resolve_seed(args.seed)
    params = learners.resolve_params(args.algo, _overrides(args, args.algo))
    raw, digest = _read(args)
    table = infer_schema(raw, args.numeric_threshold)
    config = _base_config(args, digest, seed, algo=args.algo, params=params, folds=args.folds,
                          stratified=args.stratified, per_fold_prep=args.per_fold_prep,
                          prep=_prep_config(args).to_dict())
    report = _run_cv(args, table, config, seed, args.algo, params)
    out = _out_dir(args)
    _write(out / "report.json", report.to_json())
    _write(out / "confusion.csv", _csv_header(config) + report.confusion.to_csv())
    print(f"{learners.ALGORITHM_NAMES[args.algo]}: pooled accuracy {report.mean_accuracy:.4f} "
          f"(mean fold accuracy {report.mean_fold_accuracy:.4f}, k={report.k})")
    print("fold runtimes (s): " + " ".join(f"{t:.3f}" for t in report.fold_runtimes), file=sys.stderr)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    seed = resolve_seed(args.seed)
    params = learners.resolve_params(args.algo, _overrides(args, args.algo))
    raw, digest = _read(args)
    table = infer_schema(raw, args.numeric_threshold)
    prep, data = fit_preprocessing(table, _prep_config(args))
    model = learners.fit(args.algo, data, params, seed)
    config = _base_config(args, digest, seed, algo=args.algo, params=params,
                          prep=prep.config.to_dict())
    doc = {
        "version": 1,
        "toolkit_version": __version__,
        "config": config,
        "seed": seed,
        "preprocessing": prep.to_dict(),
        "model": model.to_dict(),
    }
    _write(_out_dir(args) / "model.json", _dump(doc))
    if getattr(model, "converged", True) is False:
        print("warning: SVM hit max_passes before meeting the KKT tolerance", file=sys.stderr)
    return 0


def _load_model_file(path) -> tuple[dict, Preprocessor, learners.Model]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        prep = Preprocessor.from_dict(doc["preprocessing"])
        model = learners.model_from_dict(doc["model"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, AstromlsError):
            raise
        raise ParameterError(f"{path}: not a model file ({exc})") from None
    return doc, prep, model


def cmd_predict(args) -> int:
    doc, prep, model = _load_model_file(args.model)
    raw, digest = _read(args)
    table = coerce_to_schema(raw, prep.columns)
    fm, source = prep.features(table)
    x = source if isinstance(model, learners.NaiveBayesModel) and model.mode == "mixed" else fm
    pred = model.predict(x)
    scores = model.predict_scores(x)
    label = prep.config.label
    truth = raw.column(label) if label in raw.names else None
    config = {
        "command": "predict",
        **_input_config(args, digest),
        "label": label,
        "model_sha256": hashlib.sha256(Path(args.model).read_bytes()).hexdigest(),
        "model_config": doc.get("config"),
        "seed": doc.get("seed"),
    }
    buf = io.StringIO()
    buf.write(_csv_header(config))
    w = csv.writer(buf, lineterminator="\n")
    header = ["row_id", "predicted"] + (["true"] if truth is not None else [])
    w.writerow(header + [f"score_{n}" for n in prep.class_names])
    for i in range(table.n_rows):
        row = [i, prep.class_names[pred[i]]]
        if truth is not None:
            row.append("" if truth[i] is None else truth[i])
        w.writerow(row + [repr(float(s)) for s in scores[i]])
    _write(_out_dir(args) / "predictions.csv", buf.getvalue())
    return 0


def cmd_pca(args) -> int:
    seed = resolve_seed(args.seed)
    raw, digest = _read(args)
    table = infer_schema(raw, args.numeric_threshold)
    labels = None
    if args.label is not None:
        if args.label not in table.names:
            raise ParameterError(f"label column {args.label!r} not found")
        labels = label_strings(table, args.label)
        table = table.drop(args.label)
    fills = imputation_values(table)
    fm = hash_features(apply_imputation(table, fills), args.hash_dims, True)
    standardize = args.standardize
    if standardize is None:
        standardize = should_standardize(fm)
    scaler = fit_scaler(fm) if standardize else None
    matrix = scaler.transform(fm) if scaler is not None else fm
    model = fit_pca(matrix, args.pca)
    reduced = pca_transform(model, matrix)
    config = _base_config(args, digest, seed, hash_dims=args.hash_dims, pca=args.pca,
                          standardize=bool(standardize))
    out = _out_dir(args)
    buf = io.StringIO()
    buf.write(_csv_header(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_id", *reduced.feature_names] + ([args.label] if labels is not None else []))
    for i, row in enumerate(reduced.values):
        extra = [] if labels is None else ["" if labels[i] is None else labels[i]]
        w.writerow([i, *(repr(float(v)) for v in row), *extra])
    _write(out / "reduced.csv", buf.getvalue())
    doc = {
        "version": 1,
        "toolkit_version": __version__,
        "config": config,
        "seed": seed,
        "fills": fills,
        "scaler": None if scaler is None else scaler.to_dict(),
        "pca": model.to_dict(),
    }
    _write(out / "pca_model.json", _dump(doc))
    return 0


def _two_d(args, table) -> tuple[LabeledDataset, dict]:
    """Encoded dataset reduced to two dimensions for planar plots."""
    cfg = _prep_config(args)
    if cfg.pca is None:
        cfg = PrepConfig(cfg.label, cfg.hash_dims, True, cfg.standardize, 2)
    elif cfg.pca != 2:
        raise UsageError(f"--kind {args.kind} needs --pca 2 (or no --pca)")
    prep, data = fit_preprocessing(table, cfg)
    return data, prep.config.to_dict()


def cmd_plot(args) -> int:
    seed = resolve_seed(args.seed)
    algo = args.algo
    params = learners.resolve_params(algo, _overrides(args, algo)) if algo else None
    if algo is None and args.kind in ("confusion", "roc", "calibration"):
        raise UsageError(f"--kind {args.kind} needs --algo")
    raw, digest = _read(args)
    table = infer_schema(raw, args.numeric_threshold)
    config = _base_config(args, digest, seed, kind=args.kind, algo=algo, params=params)
    spec = visualize.PlotSpec(palette=args.palette)

    if args.kind in ("scatter", "hexbin"):
        data, prep_cfg = _two_d(args, table)
        config["prep"] = prep_cfg
        if args.kind == "scatter":
            region = None
            if algo is not None:
                if algo == "nb" and params["mode"] == "mixed":
                    raise UsageError("decision regions need a feature-matrix model (not --nb-mode mixed)")
                region = learners.fit(algo, data, params, seed)
                config["grid"] = args.grid
            spec = visualize.PlotSpec(palette=args.palette, xlabel="pc1", ylabel="pc2")
            doc = visualize.scatter_classes(data.features, data.labels, spec, region, args.grid,
                                            data.class_names, {"config": config})
        else:
            config["hex_radius"] = args.hex_radius
            spec = visualize.PlotSpec(palette=args.palette, xlabel="pc1", ylabel="pc2")
            doc = visualize.hexbin(data.features, spec, args.hex_radius, {"config": config})
    elif args.kind in ("andrews", "radviz"):
        prep, data = fit_preprocessing(table, _prep_config(args))
        config["prep"] = prep.config.to_dict()
        if args.kind == "andrews":
            config["resolution"] = args.resolution
            doc = visualize.andrews_curves(data.features, data.labels, args.resolution, spec,
                                           data.class_names, {"config": config})
        else:
            doc = visualize.radviz(data.features, data.labels, spec, data.class_names,
                                   meta={"config": config})
    else:
        config.update(folds=args.folds, stratified=args.stratified, per_fold_prep=args.per_fold_prep,
                      prep=_prep_config(args).to_dict())
        report = _run_cv(args, table, config, seed, algo, params)
        meta = {"config": config}
        if args.kind == "confusion":
            doc = visualize.confusion_heatmap(report.confusion, spec, meta)
        elif args.kind == "roc":
            curves = roc_one_vs_rest(report.scores, report.truth, report.class_names)
            doc = visualize.roc_plot(curves, visualize.PlotSpec(
                palette=args.palette, xlabel="false positive rate", ylabel="true positive rate"), meta)
        else:
            config["bins"] = args.bins
            curves = [(name, calibration(report.scores[:, k], report.truth == k, args.bins))
                      for k, name in enumerate(report.class_names)]
            doc = visualize.calibration_plot(curves, visualize.PlotSpec(
                palette=args.palette, xlabel="mean predicted score", ylabel="observed fraction"), meta)
    doc.save(_out_dir(args) / f"{args.kind}.svg")
    return 0


COMMANDS = {
    "schema": cmd_schema,
    "cv": cmd_cv,
    "train": cmd_train,
    "predict": cmd_predict,
    "pca": cmd_pca,
    "plot": cmd_plot,
}


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("astromls: error: a subcommand is required")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:   # --help / --version
        return int(exc.code or 0)
    except (AstromlsError, OSError) as exc:
        print(f"astromls: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())
