"""Evaluation harness: AUC, paired cross-validation, randomized-control
ablation, the k-means subdomain experiment and the feature/decision
consistency score."""

from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist, pdist
from sklearn.pipeline import make_pipeline

from .association import AblationFlags, IceParams, nonidentity_permutation, sub_seed, train_ice
from .data import Dataset, ZScoreScaler, stratified_folds
from .framework import ICEClassifier, with_prediction_params
from .inference import predict_batch
from .learners import (
    AdaBoostEnsemble,
    BaggingEnsemble,
    L2LogisticRegression,
    fit_or_constant,
)

METHODS = ("ice", "bagging", "adaboost", "base")
REPORT_HEADER = ["dataset", "method", "fold", "auc", "mean_models", "seconds"]


# --------------------------------------------------------------------- AUC

def _check_binary(labels) -> np.ndarray:
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("AUC needs both classes among the labels")
    return labels


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum (Mann-Whitney) statistic;
    tied scores share their average rank, i.e. count one half."""
    labels = _check_binary(labels)
    scores = np.asarray(scores, dtype=float)
    ranks = stats.rankdata(scores)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pairwise(scores, labels) -> float:
    """Brute-force AUC over all positive/negative pairs."""
    labels = _check_binary(labels)
    scores = np.asarray(scores, dtype=float)
    sp = scores[labels == 1][:, None]
    sn = scores[labels == 0][None, :]
    wins = (sp > sn).sum() + 0.5 * (sp == sn).sum()
    return float(wins / (sp.size * sn.size))


# ------------------------------------------------------------------ report

@dataclass
class ReportRow:
    dataset: str
    method: str
    fold: int
    auc: float
    mean_models: float
    seconds: float = 0.0


def fold_seed(seed: int, fold: int) -> int:
    return int(sub_seed(seed, 2, fold).generate_state(1)[0])


def make_estimator(method: str, params: IceParams, base=None, n_bags: int = 100,
                   n_rounds: int = 100, seed: int = 0, ablation: AblationFlags | None = None):
    """Estimator for one harness method; baselines get their own z-scoring
    so every method normalizes with training statistics only."""
    base = base if base is not None else L2LogisticRegression()
    if method == "ice":
        return ICEClassifier(
            n_clusters=params.L, restart_p=params.p, avg_cluster_size=params.z, w=params.w,
            s=params.s, n_neighbors=params.N, alpha=params.alpha, beta=params.beta,
            cv_folds=params.cv_folds, base_estimator=base, random_state=seed, ablation=ablation,
        )
    if method == "bagging":
        return make_pipeline(ZScoreScaler(), BaggingEnsemble(base, n_bags=n_bags, random_state=seed))
    if method == "adaboost":
        return make_pipeline(ZScoreScaler(), AdaBoostEnsemble(base, n_rounds=n_rounds))
    if method == "base":
        return make_pipeline(ZScoreScaler(), base)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _models_used(method: str, est, X_test) -> tuple[np.ndarray, float]:
    if method == "ice":
        det = est.predict_details(X_test)
        return det.proba, float(det.unique_models.mean())
    proba = est.predict_proba(X_test)[:, 1]
    final = est[-1]
    if method == "bagging":
        return proba, float(len(final.members_))
    if method == "adaboost":
        return proba, float(len(final.members_))
    return proba, 1.0


def _global_normalized(dataset: Dataset) -> np.ndarray:
    return ZScoreScaler().fit(dataset.X).transform(dataset.X)


def cross_validate(dataset: Dataset, method: str = "ice", params: IceParams | None = None,
                   seed: int = 42, folds: int = 10, normalize: str = "per-fold", base=None,
                   n_bags: int = 100, n_rounds: int = 100) -> list[ReportRow]:
    """Stratified k-fold AUC for one method.  Fold assignment depends only
    on (labels, folds, seed), so methods run with the same seed are paired."""
    params = params or IceParams()
    if normalize not in ("per-fold", "global"):
        raise ValueError("normalize must be 'per-fold' or 'global'")
    X = _global_normalized(dataset) if normalize == "global" else dataset.X
    Y = dataset.Y
    fa = stratified_folds(Y, folds, seed)
    rows = []
    for f in range(fa.k):
        train, test = fa.split(f)
        t0 = time.perf_counter()
        est = make_estimator(method, params, base, n_bags, n_rounds, fold_seed(seed, f))
        est.fit(X[train], Y[train])
        proba, used = _models_used(method, est, X[test])
        rows.append(ReportRow(dataset.name, method, f, auc(proba, Y[test]), used,
                              time.perf_counter() - t0))
    return rows


# ----------------------------------------------------------------- ablation

ABLATION_ARMS = [
    AblationFlags(c1, c2, c3)
    for c1 in (True, False) for c2 in (True, False) for c3 in (True, False)
]


def ablate(dataset: Dataset, flags: AblationFlags | Sequence[AblationFlags],
           params: IceParams | None = None, seed: int = 42, folds: int = 10,
           base=None, normalize: str = "per-fold") -> list[ReportRow]:
    """Cross-validated ICE with randomized components, alpha = beta = 0.

    Several flag sets may be passed; arms that agree on C1 share one
    training run per fold (C2 and C3 only alter the decision rows and the
    neighbor lookup).  Method ids are ``ablate:<code>``, e.g.
    ``ablate:C1+C3`` or ``ablate:none``.
    """
    arms = [flags] if isinstance(flags, AblationFlags) else list(flags)
    params = params or IceParams()
    params = IceParams(**{**params.to_dict(), "alpha": 0.0, "beta": 0.0})
    X = _global_normalized(dataset) if normalize == "global" else dataset.X
    Y = dataset.Y
    fa = stratified_folds(Y, folds, seed)
    rows = []
    for f in range(fa.k):
        train, test = fa.split(f)
        fseed = fold_seed(seed, f)
        fold_params = IceParams(**{**params.to_dict(), "seed": fseed})
        train_ds = Dataset(X[train], Y[train], name=dataset.name)
        trained = {}
        for arm in arms:
            t0 = time.perf_counter()
            arm_seeded = AblationFlags(arm.randomize_c1, arm.randomize_c2, arm.randomize_c3,
                                       seed=fseed)
            c1 = arm.randomize_c1
            if c1 not in trained:
                trained[c1] = train_ice(train_ds, fold_params, base,
                                        AblationFlags(randomize_c1=c1, seed=fseed))
            model = trained[c1]
            if arm.randomize_c2:
                perm = nonidentity_permutation(model.Q, sub_seed(fseed, 12))
                model = _permuted(model, perm)
            model = with_prediction_params(model, ablation=arm_seeded)
            det = predict_batch(model, X[test])
            rows.append(ReportRow(dataset.name, f"ablate:{arm.code}", f, auc(det.proba, Y[test]),
                                  float(det.unique_models.mean()), time.perf_counter() - t0))
    return rows


def _permuted(model, perm):
    new = copy.copy(model)
    new.decision = model.decision[perm]
    new.row_permutation = perm
    return new


# ------------------------------------------------------------------ k-means

def kmeans(X, k: int, seed: int = 0, max_iter: int = 300) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm from a seeded k-means++ start.

    Returns (labels, centroids).  Distance ties go to the lower centroid
    index; a centroid left without points is moved to the point farthest
    from its current centroid.
    """
    X = np.asarray(X, dtype=float)
    Q = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > Q:
        raise ValueError(f"k={k} exceeds the number of instances {Q}")
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(Q)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(Q, p=d2 / total))
        else:
            idx = int(rng.integers(Q))
        centroids[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centroids[c]) ** 2, axis=1))

    labels = np.full(Q, -1)
    for _ in range(max_iter):
        dist = cdist(X, centroids, "sqeuclidean")
        new_labels = np.argmin(dist, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                own = dist[np.arange(Q), new_labels]
                far = int(np.argmax(own))
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = np.array([X[labels == c].mean(axis=0) for c in range(k)])
    return labels, centroids


# --------------------------------------------------------- subdomain test

SOURCES = ("a", "b", "c", "whole")


@dataclass
class EvidenceResult:
    """AUC of each test cluster (rows a, b, c) under each training source
    (columns a, b, c, whole); gain subtracts the whole column."""

    auc: np.ndarray
    gain: np.ndarray
    applicable: np.ndarray
    cluster_sizes: list[int]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(m):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in m]
        return {
            "rows": list(SOURCES[:3]),
            "columns": list(SOURCES),
            "auc": clean(self.auc),
            "gain": clean(self.gain),
            "applicable": self.applicable.tolist(),
            "cluster_sizes": self.cluster_sizes,
            "metadata": self.metadata,
        }


def _applicable(Y, idx, min_size=10) -> bool:
    y = Y[idx]
    return len(idx) >= min_size and 0 < y.sum() < len(y)


def subdomain_evidence(dataset: Dataset, base=None, seed: int = 42, repeats: int = 5,
                       inner_folds: int = 5) -> EvidenceResult:
    """Cross-test three disjoint k-means clusters against each other and
    against the whole data with size-matched training sets.

    For a test cluster t, each CV fold's training set has as many instances
    as t minus the fold.  A larger source is subsampled to that size; a
    smaller source is used whole and topped up from t outside the test
    fold; the whole-data source samples from everything outside the fold.
    Each cell averages ``repeats`` redraws of folds and samples.
    """
    base = base if base is not None else L2LogisticRegression()
    X = _global_normalized(dataset)
    Y = dataset.Y
    labels, _ = kmeans(X, 3, seed)
    sizes = np.bincount(labels, minlength=3)
    order = sorted(range(3), key=lambda c: (-sizes[c], c))
    clusters = [np.flatnonzero(labels == c) for c in order]
    Q = len(Y)

    aucs = np.full((3, 4), np.nan)
    ok = np.zeros((3, 4), dtype=bool)
    src_ok = [_applicable(Y, c) for c in clusters] + [True]
    for ti, tidx in enumerate(clusters):
        if not src_ok[ti]:
            continue
        for si in range(4):
            if not src_ok[si]:
                continue
            ok[ti, si] = True
            vals = []
            for r in range(repeats):
                rng = np.random.default_rng(sub_seed(seed, 4, ti, si, r))
                fold_seed_ = int(sub_seed(seed, 5, ti, r).generate_state(1)[0])
                fa = stratified_folds(Y[tidx], inner_folds, fold_seed_)
                pred = np.empty(len(tidx))
                for f in range(fa.k):
                    in_test = fa.fold_of == f
                    test_idx = tidx[in_test]
                    rest_t = tidx[~in_test]
                    n_target = len(rest_t)
                    if si == ti:
                        train_idx = rest_t
                    elif si == 3:
                        pool = np.setdiff1d(np.arange(Q), test_idx)
                        train_idx = rng.choice(pool, size=n_target, replace=False)
                    else:
                        src = clusters[si]
                        if len(src) >= n_target:
                            train_idx = rng.choice(src, size=n_target, replace=False)
                        else:
                            top_up = rng.choice(rest_t, size=n_target - len(src), replace=False)
                            train_idx = np.concatenate([src, top_up])
                    model = fit_or_constant(base, X[train_idx], Y[train_idx])
                    pred[in_test] = model.positive_proba(X[test_idx])
                vals.append(auc(pred, Y[tidx]))
            aucs[ti, si] = float(np.mean(vals))
    gain = aucs - aucs[:, 3:4]
    return EvidenceResult(
        auc=aucs, gain=gain, applicable=ok, cluster_sizes=[len(c) for c in clusters],
        metadata={"inner_folds": inner_folds, "repeats": repeats, "seed": seed,
                  "kmeans_k": 3, "normalization": "global z-score"},
    )


# -------------------------------------------------------------- consistency

def consistency_score(X, D) -> float:
    """Pearson correlation between feature-space similarity (negative
    Euclidean distance) and decision-row similarity (fraction of equal
    bits) over all instance pairs.  Zero variance on either side gives 0."""
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float)
    if X.shape[0] < 3:
        raise ValueError("consistency_score needs at least 3 instances")
    feat = -pdist(X)
    dec = 1.0 - pdist(D, "hamming")
    if np.ptp(feat) == 0 or np.ptp(dec) == 0:
        return 0.0
    r = float(np.corrcoef(feat, dec)[0, 1])
    return float(np.clip(r, -1.0, 1.0))


# -------------------------------------------------------------- aggregates

def aggregate(rows: Iterable[ReportRow], reference: str = "bagging", tie_tol: float = 1e-6) -> dict:
    """Per-method mean AUC and win/tie/loss counts against ``reference``,
    judged on each dataset's mean fold AUC."""
    rows = list(rows)
    per = {}
    for r in rows:
        per.setdefault((r.dataset, r.method), []).append(r.auc)
    datasets = sorted({d for d, _ in per})
    methods = sorted({m for _, m in per})
    means = {m: {d: float(np.mean(per[(d, m)])) for d in datasets if (d, m) in per} for m in methods}
    out = {"reference": reference, "datasets": datasets, "methods": {}}
    for m in methods:
        entry = {
            "mean_auc": float(np.mean(list(means[m].values()))),
            "per_dataset": means[m],
            "mean_models": float(np.mean([r.mean_models for r in rows if r.method == m])),
        }
        if reference in means and m != reference:
            shared = [d for d in datasets if d in means[m] and d in means[reference]]
            diffs = np.array([means[m][d] - means[reference][d] for d in shared])
            entry["wins"] = int(np.sum(diffs > tie_tol))
            entry["ties"] = int(np.sum(np.abs(diffs) <= tie_tol))
            entry["losses"] = int(np.sum(diffs < -tie_tol))
            entry["mean_gain"] = float(diffs.mean()) if len(diffs) else float("nan")
            if len(diffs) >= 2 and np.ptp(diffs) > 0:
                entry["paired_t_pvalue"] = float(stats.ttest_rel(
                    [means[m][d] for d in shared], [means[reference][d] for d in shared]).pvalue)
        out["methods"][m] = entry
    return out


def sort_rows(rows: Iterable[ReportRow]) -> list[ReportRow]:
    return sorted(rows, key=lambda r: (r.dataset, r.method, r.fold))


def write_report_csv(rows: Iterable[ReportRow], path, timings: bool = False) -> None:
    """Rows sorted by (dataset, method, fold).  Wall-clock seconds are
    written only when ``timings`` is set, keeping default output
    reproducible byte for byte."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in sort_rows(rows):
            w.writerow([r.dataset, r.method, r.fold, repr(float(r.auc)), repr(float(r.mean_models)),
                        repr(float(r.seconds)) if timings else ""])


def read_report_csv(path) -> list[ReportRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            ReportRow(d["dataset"], d["method"], int(d["fold"]), float(d["auc"]),
                      float(d["mean_models"]), float(d["seconds"]) if d["seconds"] else 0.0)
            for d in csv.DictReader(fh)
        ]


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


__all__ = [
    "ABLATION_ARMS",
    "EvidenceResult",
    "ReportRow",
    "ablate",
    "aggregate",
    "auc",
    "auc_pairwise",
    "consistency_score",
    "cross_validate",
    "kmeans",
    "subdomain_evidence",
    "write_report_csv",
]
