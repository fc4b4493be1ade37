"""Command-line interface: train, evaluate, classify, explain, serve.

Exit codes: 0 success, 1 configuration error (bad flags, unreadable paths),
2 runtime error (malformed data, training/serving failures).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .cluster import ClusterError
from .data import DataError, Dataset, parse_arff, parse_csv, schema_from_csv, \
    stratified_kfold
from .explain import ExplainError, NotViolation, build_report, render_text, \
    report_to_dict
from .lmt import LmtError, TrainParams, deserialize_model, evaluate, predict_proba, \
    serialize_model, train
from .service import DECISION_ACCEPTED, DECISION_REJECTED, ServiceError, \
    WorkflowService
from .taxonomy import TaxonomyError, load_taxonomy

DOMAIN_ERRORS = (DataError, LmtError, ClusterError, TaxonomyError, ExplainError,
                 ServiceError)


class ConfigError(Exception):
    """Invalid invocation: wrong flags, unreadable files, bad addresses."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits with code 2
        raise ConfigError(message)


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def _load_dataset(path: str, fmt: str) -> Dataset:
    text = _read_text(path)
    if fmt == "arff":
        return parse_arff(text)
    return parse_csv(text, schema_from_csv(text))


def _oversample_minority(ds: Dataset) -> Dataset:
    """Deterministic class re-weighting: replicate minority rows to near-parity."""
    n_pos = int((ds.y == 1).sum())
    n_neg = len(ds) - n_pos
    if min(n_pos, n_neg) == 0:
        return ds
    minority = 1 if n_pos < n_neg else 0
    factor = int(round(max(n_pos, n_neg) / min(n_pos, n_neg)))
    if factor <= 1:
        return ds
    extra = np.flatnonzero(ds.y == minority)
    idx = np.concatenate([np.arange(len(ds))] + [extra] * (factor - 1))
    return Dataset(ds.schema, ds.X[idx], ds.y[idx])


def _params_from_args(args: argparse.Namespace) -> TrainParams:
    return TrainParams(
        seed=args.seed,
        max_boost_iters=args.max_boost_iters,
        cv_folds_for_iters=args.cv_folds,
        min_split=args.min_split,
        max_depth=args.max_depth,
        z_max=args.z_max,
        prune=not args.no_prune,
    )


def _add_train_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-file", required=True, help="labeled dataset path")
    p.add_argument("--format", choices=("arff", "csv"), default="arff")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-boost-iters", type=int, default=200)
    p.add_argument("--cv-folds", type=int, default=5,
                   help="folds for choosing the boosting iteration count")
    p.add_argument("--min-split", type=int, default=15)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--z-max", type=float, default=3.0)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument("--class-weight", choices=("none", "balanced"), default="none",
                   help="'balanced' replicates minority rows to near-parity "
                        "before fitting")


def cmd_train(args: argparse.Namespace) -> int:
    ds = _load_dataset(args.train_file, args.format)
    if args.class_weight == "balanced":
        ds = _oversample_minority(ds)
    model = train(ds, _params_from_args(args))
    _write_text(args.out, serialize_model(model) + "\n")
    print(json.dumps({"out": args.out, "instances": len(ds),
                      "leaves": model.leaf_count(),
                      "boost_iters": model.training_meta.get("boost_iters")}))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    ds = _load_dataset(args.train_file, args.format)
    folds = stratified_kfold(ds, args.folds, args.seed)
    params = _params_from_args(args)

    def factory(train_ds: Dataset):
        if args.class_weight == "balanced":
            train_ds = _oversample_minority(train_ds)
        return train(train_ds, params)

    metrics = evaluate(factory, ds, folds, threshold=args.threshold)
    out = {"folds": args.folds, "threshold": args.threshold, **metrics.as_dict()}
    print(json.dumps(out, indent=2))
    return 0


def _read_feature_rows(path: str, schema) -> np.ndarray:
    """Unlabeled CSV: header must equal the schema's feature names exactly."""
    reader = csv.reader(io.StringIO(_read_text(path)))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty input file") from None
    if [h.strip() for h in header] != list(schema.feature_names):
        raise DataError("input header does not match the model's feature names")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != schema.n_features:
            raise DataError(f"line {lineno}: expected {schema.n_features} cells")
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise DataError(f"line {lineno}: non-numeric cell") from exc
    if not rows:
        raise DataError("no data rows in input")
    x = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite value in input")
    return x


def cmd_classify(args: argparse.Namespace) -> int:
    model = deserialize_model(_read_text(args.model))
    X = _read_feature_rows(args.input, model.schema)
    for i in range(X.shape[0]):
        p, _ = predict_proba(model, X[i])
        decision = DECISION_REJECTED if p >= args.threshold else DECISION_ACCEPTED
        print(json.dumps({"index": i, "probability": p, "decision": decision}))
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    model = deserialize_model(_read_text(args.model))
    taxonomy = load_taxonomy(_read_text(args.taxonomy))
    X = _read_feature_rows(args.input, model.schema)
    if X.shape[0] != 1:
        raise DataError(f"explain expects exactly one data row, got {X.shape[0]}")
    try:
        report = build_report(model, X[0], taxonomy, threshold=args.threshold)
    except NotViolation:
        p, _ = predict_proba(model, X[0])
        if args.json:
            print(json.dumps({"decision": DECISION_ACCEPTED, "probability": p}))
        else:
            print(f"accepted (violation probability {p:.4f}); nothing to explain")
        return 0
    if args.json:
        print(json.dumps(report_to_dict(report), indent=2))
    else:
        print(render_text(report))
    return 0


def _parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port = listen.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"--listen must be HOST:PORT, got {listen!r}")
    try:
        return host, int(port)
    except ValueError as exc:
        raise ConfigError(f"bad port in {listen!r}") from exc


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .http_api import create_app

    log_dir = os.environ.get("FNVD_LOG_DIR") or args.log
    taxonomy = load_taxonomy(_read_text(args.taxonomy))
    host, port = _parse_listen(args.listen)
    service = WorkflowService(log_dir, taxonomy, threshold=args.threshold)
    if args.model:
        model = deserialize_model(_read_text(args.model))
        service.register_model(model, activate=True)
    elif service.active_version() is None:
        raise ConfigError("no --model given and the log directory has no "
                          "active model version")
    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fnvd",
                     description="Norm-violation detection: train and apply "
                                 "logistic model trees, explain rejections, "
                                 "and run the moderation service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[], help="fit a model and write it to disk")
    _add_train_params(p)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="stratified k-fold evaluation")
    _add_train_params(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify", help="classify unlabeled feature rows")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="CSV of feature rows (no label)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("explain", help="explain one violation-classified row")
    p.add_argument("--model", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--input", required=True, help="CSV with exactly one feature row")
    p.add_argument("--threshold", type=float, default=0.5)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--json", action="store_true")
    mode.add_argument("--text", action="store_true", help="default")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("serve", help="run the moderation HTTP service")
    p.add_argument("--model", help="model file registered and activated at boot")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--log", default="fnvd_logs",
                   help="log directory (FNVD_LOG_DIR overrides)")
    p.add_argument("--listen", default="127.0.0.1:8000")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
