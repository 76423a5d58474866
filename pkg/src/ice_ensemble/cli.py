"""Command-line front end: ``ice <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.  Primary outputs are reproducible byte for byte for a fixed
``--seed``; wall-clock times and timestamps go to a ``.meta.json`` file
written next to the primary output.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .association import AblationFlags, IceParams, train_ice
from .data import Dataset, RawTable, ZScoreScaler, load_dataset, stratified_folds
from .evaluation import (
    ABLATION_ARMS,
    METHODS,
    ReportRow,
    ablate,
    aggregate,
    auc,
    consistency_score,
    cross_validate,
    fold_seed,
    subdomain_evidence,
    write_json,
    write_report_csv,
)
from .exceptions import DataError, InvariantError
from .framework import load, resweep_decision, save, with_prediction_params
from .inference import predict_batch, predict_normalized
from .learners import DecisionStump, L2LogisticRegression


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def _add_data(p, many=False):
    if many:
        p.add_argument("--data", nargs="+", required=True,
                       help="CSV files and/or directories of CSV files")
    else:
        p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--label-col", default="label", help="label column name")
    p.add_argument("--nominal", choices=("onehot", "drop"), default="onehot",
                   help="nominal column handling")


def _add_ice(p):
    g = p.add_argument_group("ICE parameters")
    g.add_argument("--clusters", type=int, default=100, help="number of clusters L (incl. whole set)")
    g.add_argument("--restart-p", type=float, default=0.3, help="random-walk restart probability")
    g.add_argument("--avg-cluster-size", type=float, default=None,
                   help="average partial-cluster size z (default: Q/3)")
    g.add_argument("--w", type=float, default=0.4, help="whole-model advantage score")
    g.add_argument("--s", type=float, default=0.5, help="local-model advantage score")
    g.add_argument("--neighbors", type=int, default=5, help="nearest neighbors N at prediction")
    g.add_argument("--alpha", type=float, default=1.0, help="whole-model weight per selected model")
    g.add_argument("--beta", type=float, default=1.0, help="whole-model weight per neighbor")
    g.add_argument("--cv-folds", type=int, default=10, help="inner CV folds for the decision table")
    g.add_argument("--base", choices=("logistic", "stump"), default="logistic",
                   help="base learner")


def _add_eval(p):
    p.add_argument("--folds", type=int, default=10, help="outer CV folds")
    p.add_argument("--normalize", choices=("per-fold", "global"), default="per-fold",
                   help="z-score with training-fold statistics or the whole dataset")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    ap = _Parser(prog="ice", description="Individualized classifier ensembles.", formatter_class=fmt)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and save it", formatter_class=fmt)
    _add_data(p)
    _add_ice(p)
    p.add_argument("--seed", type=int, default=42, help="random seed")
    p.add_argument("--out", required=True, help="model directory")

    p = sub.add_parser("predict", help="score a CSV with a saved model", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--data", required=True, help="CSV file; the label column is optional")
    p.add_argument("--label-col", default="label", help="label column name (ignored if absent)")
    p.add_argument("--neighbors", type=int, default=None, help="override N (default: model's)")
    p.add_argument("--alpha", type=float, default=None, help="override alpha (default: model's)")
    p.add_argument("--beta", type=float, default=None, help="override beta (default: model's)")
    p.add_argument("--out", required=True, help="predictions CSV")

    p = sub.add_parser("bench", help="paired cross-validation benchmark", formatter_class=fmt)
    _add_data(p, many=True)
    _add_ice(p)
    _add_eval(p)
    p.add_argument("--methods", type=_csv_list(str), default=["ice", "bagging"],
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--n-bags", type=int, default=100, help="bagging ensemble size")
    p.add_argument("--n-rounds", type=int, default=100, help="AdaBoost rounds")
    p.add_argument("--reference", default="bagging", help="method that gains are measured against")
    p.add_argument("--seed", type=int, default=42, help="random seed")
    p.add_argument("--timings", action="store_true", help="write wall-clock seconds per fold")
    p.add_argument("--out", required=True, help="report CSV; aggregates go to <out>.summary.json")

    p = sub.add_parser("ablate", help="randomized-component ablation", formatter_class=fmt)
    _add_data(p, many=True)
    _add_ice(p)
    _add_eval(p)
    p.add_argument("--arms", default="all", choices=("all", "single"),
                   help="all 8 arms, or none/C1/C2/C3/C1+C2+C3")
    p.add_argument("--seeds", type=_csv_list(int), default=[42], help="comma-separated seeds")
    p.add_argument("--n-bags", type=int, default=100, help="bagging reference size")
    p.add_argument("--timings", action="store_true", help="write wall-clock seconds per fold")
    p.add_argument("--out", required=True, help="report CSV; aggregates go to <out>.summary.json")

    p = sub.add_parser("evidence", help="k-means subdomain cross-test", formatter_class=fmt)
    _add_data(p)
    p.add_argument("--base", choices=("logistic", "stump"), default="logistic", help="base learner")
    p.add_argument("--repeats", type=int, default=5, help="repeats per cell")
    p.add_argument("--inner-folds", type=int, default=5, help="CV folds inside each test cluster")
    p.add_argument("--seed", type=int, default=42, help="random seed")
    p.add_argument("--out", required=True, help="JSON report")

    p = sub.add_parser("inspect", help="summarize a saved model as JSON", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--out", default="-", help="JSON output file, '-' for stdout")

    p = sub.add_parser("sweep", help="cross-validated grid over w, s and N", formatter_class=fmt)
    _add_data(p)
    _add_ice(p)
    _add_eval(p)
    p.add_argument("--w-grid", type=_csv_list(float), default=[0.0, 0.2, 0.4, 0.6],
                   help="comma-separated w values")
    p.add_argument("--s-grid", type=_csv_list(float), default=[0.0, 0.25, 0.5, 0.75],
                   help="comma-separated s values")
    p.add_argument("--neighbors-grid", type=_csv_list(int), default=[1, 5, 10],
                   help="comma-separated N values")
    p.add_argument("--seed", type=int, default=42, help="random seed")
    p.add_argument("--out", required=True, help="sweep CSV")
    return ap


# ------------------------------------------------------------------ helpers

def _params(args, seed=None) -> IceParams:
    return IceParams(
        L=args.clusters, p=args.restart_p, z=args.avg_cluster_size, w=args.w, s=args.s,
        N=args.neighbors, alpha=args.alpha, beta=args.beta, cv_folds=args.cv_folds,
        seed=args.seed if seed is None else seed,
    )


def _base(name):
    return DecisionStump() if name == "stump" else L2LogisticRegression()


def _data_files(items) -> list[str]:
    files = []
    for item in items:
        if os.path.isdir(item):
            found = sorted(str(p) for p in Path(item).glob("*.csv"))
            if not found:
                raise DataError(f"no CSV files in directory {item}")
            files.extend(found)
        elif os.path.isfile(item):
            files.append(item)
        else:
            raise DataError(f"missing file: {item}")
    return files


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("started", "t0")}


def _write_meta(path, args, extra=None) -> None:
    meta = {
        "command": args.command,
        "config": _config(args),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": args.started,
        "seconds": round(time.perf_counter() - args.t0, 3),
    }
    if extra:
        meta.update(extra)
    write_json(meta, path)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _read_features(path, label_col) -> tuple[RawTable, np.ndarray | None]:
    """Read a CSV whose label column may be absent."""
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"empty table: {path}") from None
        body = [row for row in reader if row]
    if not body:
        raise DataError(f"empty table: {path} has a header but no rows")
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"ragged rows: line {lineno} has {len(row)} cells, header has {len(header)}")
    rows = [{h: c.strip() for h, c in zip(header, row)} for row in body]
    labels = None
    if label_col in header:
        values = sorted({r[label_col] for r in rows})
        if len(values) == 2:
            labels = np.array([values.index(r[label_col]) for r in rows])
    cols = [(h, "") for h in header if h != label_col]
    return RawTable(cols, rows, label_col), labels


# ---------------------------------------------------------------- commands

def cmd_train(args) -> None:
    ds = load_dataset(args.data, args.label_col, args.nominal)
    model = train_ice(ds, _params(args), _base(args.base))
    save(model, args.out)
    _write_meta(os.path.join(args.out, "run.meta.json"), args,
                {"dataset": ds.name, "Q": ds.Q, "R": ds.R, "L": model.L})
    print(f"trained {ds.name}: Q={ds.Q} R={ds.R} L={model.L} -> {args.out}")


def cmd_predict(args) -> None:
    model = load(args.model)
    changes = {k: v for k, v in (("N", args.neighbors), ("alpha", args.alpha), ("beta", args.beta))
               if v is not None}
    if changes:
        try:
            IceParams(**{**model.params.to_dict(), **changes})
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        model = with_prediction_params(model, **changes)
    raw, labels = _read_features(args.data, args.label_col)
    if model.schema is None:
        raise DataError("model has no feature schema; cannot encode CSV input")
    X = model.schema.transform(raw)
    res = predict_batch(model, X)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "probability", "label", "M", "unique_models"])
        for i, p in enumerate(res.proba):
            w.writerow([i, repr(float(p)), int(p >= 0.5), int(res.M[i]), int(res.unique_models[i])])
    extra = {"n": len(res.proba), "mean_models_per_prediction": float(res.unique_models.mean())}
    if labels is not None and 0 < labels.sum() < len(labels):
        extra["auc"] = auc(res.proba, labels)
    _write_meta(args.out + ".meta.json", args, extra)
    print(f"predicted {len(res.proba)} rows -> {args.out}")


def cmd_bench(args) -> None:
    bad = [m for m in args.methods if m not in METHODS]
    if bad or not args.methods:
        raise UsageError(f"unknown methods {bad}; choose from {','.join(METHODS)}")
    params = _params(args)
    rows = []
    for path in _data_files(args.data):
        ds = load_dataset(path, args.label_col, args.nominal)
        for method in args.methods:
            rows += cross_validate(ds, method, params, args.seed, args.folds, args.normalize,
                                   _base(args.base), args.n_bags, args.n_rounds)
            print(f"{ds.name} {method}: mean AUC "
                  f"{np.mean([r.auc for r in rows if r.dataset == ds.name and r.method == method]):.4f}",
                  file=sys.stderr)
    write_report_csv(rows, args.out, args.timings)
    write_json({"aggregate": aggregate(rows, args.reference)}, args.out + ".summary.json")
    _write_meta(args.out + ".meta.json", args)
    print(f"wrote {len(rows)} rows -> {args.out}")


def cmd_ablate(args) -> None:
    if args.arms == "all":
        arms = ABLATION_ARMS
    else:
        arms = [AblationFlags(), AblationFlags(True, False, False), AblationFlags(False, True, False),
                AblationFlags(False, False, True), AblationFlags(True, True, True)]
    rows = []
    for path in _data_files(args.data):
        ds = load_dataset(path, args.label_col, args.nominal)
        for seed in args.seeds:
            params = _params(args, seed)
            for r in cross_validate(ds, "bagging", params, seed, args.folds, args.normalize,
                                    _base(args.base), args.n_bags):
                rows.append(ReportRow(r.dataset, f"bagging@{seed}", r.fold, r.auc, r.mean_models,
                                      r.seconds))
            for r in ablate(ds, arms, params, seed, args.folds, _base(args.base), args.normalize):
                rows.append(ReportRow(r.dataset, f"{r.method}@{seed}", r.fold, r.auc,
                                      r.mean_models, r.seconds))
            print(f"{ds.name} seed {seed} done", file=sys.stderr)
    write_report_csv(rows, args.out, args.timings)
    write_json({"gains": ablation_gains(rows)}, args.out + ".summary.json")
    _write_meta(args.out + ".meta.json", args)
    print(f"wrote {len(rows)} rows -> {args.out}")


def ablation_gains(rows) -> dict:
    """Mean AUC gain of each arm over the same-seed bagging run, averaged
    over datasets and seeds."""
    per = {}
    for r in rows:
        method, seed = r.method.rsplit("@", 1)
        per.setdefault((r.dataset, seed, method), []).append(r.auc)
    means = {k: float(np.mean(v)) for k, v in per.items()}
    gains = {}
    for (d, seed, method), m in sorted(means.items()):
        if method == "bagging":
            continue
        gains.setdefault(method, []).append(m - means[(d, seed, "bagging")])
    return {m: {"mean_gain": float(np.mean(g)), "n": len(g)} for m, g in gains.items()}


def cmd_evidence(args) -> None:
    ds = load_dataset(args.data, args.label_col, args.nominal)
    res = subdomain_evidence(ds, _base(args.base), args.seed, args.repeats, args.inner_folds)
    out = res.to_dict()
    out["dataset"] = ds.name
    write_json(out, args.out)
    _write_meta(args.out + ".meta.json", args)
    print(f"evidence for {ds.name} -> {args.out}")


def inspect_model(model) -> dict:
    """JSON-ready summary of cluster sizes, decision-table density and
    model-count statistics."""
    D = model.decision
    sizes = np.asarray(model.clusters.sizes())
    partial = sizes[:-1]
    per_instance = D[:, :-1].sum(axis=1)
    width = max(1, int(np.ceil(model.L / 20)))
    edges = np.arange(0, model.L - 1 + width, width)
    if edges[-1] < model.L:
        edges = np.append(edges, edges[-1] + width)
    counts, _ = np.histogram(per_instance, bins=edges)
    res = predict_normalized(model, model.train_X)
    cons = consistency_score(model.train_X, D) if model.Q >= 3 else 0.0
    return {
        "Q": model.Q,
        "R": int(model.train_X.shape[1]),
        "L": model.L,
        "params": model.params.to_dict(),
        "ablation": None if model.ablation is None else model.ablation.code,
        "cluster_sizes": [int(v) for v in sizes],
        "cluster_size_summary": {
            "min": int(partial.min()) if len(partial) else None,
            "mean": float(partial.mean()) if len(partial) else None,
            "max": int(partial.max()) if len(partial) else None,
        },
        "decision_density": [float(v) for v in D.mean(axis=0)],
        "associated_models_per_instance": {
            "mean": float(per_instance.mean()),
            "histogram": [{"lo": int(lo), "hi": int(hi), "count": int(c)}
                          for lo, hi, c in zip(edges[:-1], edges[1:], counts)],
        },
        "consistency_score": cons,
        "mean_models_per_prediction": float(res.unique_models.mean()),
        "mean_selected_per_prediction": float(res.M.mean()),
    }


def cmd_inspect(args) -> None:
    report = inspect_model(load(args.model))
    if args.out == "-":
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        write_json(report, args.out)


def cmd_sweep(args) -> None:
    ds = load_dataset(args.data, args.label_col, args.nominal)
    params = _params(args)
    X = ZScoreScaler().fit(ds.X).transform(ds.X) if args.normalize == "global" else ds.X
    fa = stratified_folds(ds.Y, args.folds, args.seed)
    out = []
    for f in range(fa.k):
        train, test = fa.split(f)
        fparams = IceParams(**{**params.to_dict(), "seed": fold_seed(args.seed, f)})
        model = train_ice(Dataset(X[train], ds.Y[train], name=ds.name), fparams, _base(args.base))
        for w in args.w_grid:
            for s in args.s_grid:
                m = resweep_decision(model, w, s)
                for n in args.neighbors_grid:
                    res = predict_batch(with_prediction_params(m, N=n), X[test])
                    out.append((w, s, n, f, auc(res.proba, ds.Y[test]), float(res.unique_models.mean())))
    out.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["w", "s", "N", "fold", "auc", "mean_models"])
        for w, s, n, f, a, mm in out:
            wr.writerow([repr(w), repr(s), n, f, repr(a), repr(mm)])
    _write_meta(args.out + ".meta.json", args)
    print(f"wrote {len(out)} rows -> {args.out}")


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "bench": cmd_bench,
    "ablate": cmd_ablate,
    "evidence": cmd_evidence,
    "inspect": cmd_inspect,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        for name in ("clusters", "neighbors", "cv_folds", "folds"):
            if getattr(args, name, 2) is not None and getattr(args, name, 2) < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if hasattr(args, "clusters"):
            try:
                _params(args, 0)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        args.t0 = time.perf_counter()
        args.started = _now()
        COMMANDS[args.command](args)
        return 0
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
