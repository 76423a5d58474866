"""Public entry points: the scikit-learn estimator, parameter re-sweeps and
model persistence."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .association import (
    AblationFlags,
    IceModel,
    IceParams,
    build_decision_table,
    check_model,
    train_ice,
)
from .data import Dataset, FeatureSchema, ZScoreScaler
from .exceptions import DataError
from .graphcluster import ClusterSet
from .inference import predict_batch, predict_instance
from .learners import model_from_dict

FORMAT_VERSION = 1


def fit(dataset: Dataset, params: IceParams | None = None, base=None) -> IceModel:
    return train_ice(dataset, params, base)


def resweep_decision(model: IceModel, w: float, s: float) -> IceModel:
    """Copy of ``model`` with the decision table rebuilt for new advantage
    scores, reusing the stored cross-validated errors."""
    if model.errors is None:
        raise ValueError("model has no stored error table; retrain to re-sweep")
    D = build_decision_table(model.errors, model.clusters.membership(), w, s)
    if model.row_permutation is not None:
        D = D[model.row_permutation]
    new = copy.copy(model)
    new.params = copy.copy(model.params)
    new.params.w = float(w)
    new.params.s = float(s)
    new.decision = D
    return new


def with_prediction_params(model: IceModel, **changes) -> IceModel:
    """Copy of ``model`` with prediction-time parameters (N, alpha, beta) or
    ablation flags replaced; nothing is refit."""
    new = copy.copy(model)
    new.params = copy.copy(model.params)
    for key in ("N", "alpha", "beta"):
        if key in changes:
            setattr(new.params, key, changes.pop(key))
    if "ablation" in changes:
        new.ablation = changes.pop("ablation")
    if changes:
        raise TypeError(f"unexpected parameters: {sorted(changes)}")
    return new


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def save(model: IceModel, path) -> None:
    """Write ``manifest.json`` plus one JSON file per pool model."""
    path = Path(path)
    (path / "models").mkdir(parents=True, exist_ok=True)
    cs = model.clusters
    manifest = {
        "format_version": FORMAT_VERSION,
        "params": model.params.to_dict(),
        "scaler": model.scaler.to_dict(),
        "feature_names": list(model.feature_names),
        "schema": model.schema.to_dict() if model.schema is not None else None,
        "train_X": [_floats(r) for r in model.train_X],
        "Y": [int(v) for v in model.Y],
        "clusters": [[int(i) for i in c] for c in cs.clusters],
        "cluster_weights": None if cs.weights is None else [_floats(w) for w in cs.weights],
        "centers": [int(t) for t in cs.centers],
        "z": cs.z,
        "requested_L": cs.requested_L,
        "decision": ["".join("1" if v else "0" for v in row) for row in model.decision],
        "errors": None if model.errors is None else [_floats(r) for r in model.errors],
        "row_permutation": None if model.row_permutation is None else [int(i) for i in model.row_permutation],
        "ablation": None if model.ablation is None else vars(model.ablation),
        "models": [f"models/model_{j:04d}.json" for j in range(len(model.pool))],
    }
    for rel, m in zip(manifest["models"], model.pool):
        with open(path / rel, "w", encoding="utf-8") as fh:
            json.dump(m.to_dict(), fh)
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)


def load(path) -> IceModel:
    path = Path(path)
    try:
        with open(path / "manifest.json", encoding="utf-8") as fh:
            m = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model at {path}: {exc}") from None
    try:
        pool = []
        for rel in m["models"]:
            with open(path / rel, encoding="utf-8") as fh:
                pool.append(model_from_dict(json.load(fh)))
        cs = ClusterSet(
            clusters=[np.array(c, dtype=np.int64) for c in m["clusters"]],
            z=float(m["z"]),
            centers=np.array(m["centers"], dtype=np.int64),
            weights=None if m.get("cluster_weights") is None
            else [np.array(w, dtype=float) for w in m["cluster_weights"]],
            requested_L=m.get("requested_L"),
        )
        D = np.array([[c == "1" for c in row] for row in m["decision"]], dtype=np.int8)
        model = IceModel(
            train_X=np.array(m["train_X"], dtype=float),
            Y=np.array(m["Y"], dtype=np.int64),
            clusters=cs,
            pool=pool,
            decision=D,
            params=IceParams(**m["params"]),
            scaler=ZScoreScaler.from_dict(m["scaler"]),
            errors=None if m.get("errors") is None else np.array(m["errors"], dtype=float),
            row_permutation=None if m.get("row_permutation") is None
            else np.array(m["row_permutation"], dtype=np.int64),
            ablation=None if m.get("ablation") is None else AblationFlags(**m["ablation"]),
            feature_names=m.get("feature_names", []),
            schema=None if m.get("schema") is None else FeatureSchema.from_dict(m["schema"]),
        )
    except (OSError, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt model at {path}: {exc}") from None
    check_model(model)
    return model


class ICEClassifier(ClassifierMixin, BaseEstimator):
    """Individualized classifier ensemble.

    Training splits the instances into ``n_clusters - 1`` overlapping
    clusters plus the whole set and fits ``base_estimator`` on each; every
    training instance is then associated with the models that predict it
    (out of fold) at least as well as the whole model, after the advantage
    scores ``w`` (whole) and ``s`` (local) are applied.  A test instance
    averages the models associated with its ``n_neighbors`` nearest
    training instances together with the whole model, weighted by
    ``alpha`` and ``beta``.

    Parameters
    ----------
    n_clusters : int, default=100
        Total number of clusters L, including the whole-set cluster.
    restart_p : float, default=0.3
        Restart probability of the random walk used for clustering.
    avg_cluster_size : float or None, default=None
        Target average size of the partial clusters; None means Q/3.
    w, s : float, default=0.4, 0.5
        Advantage scores of the whole model and of local models.
    n_neighbors : int, default=5
    alpha, beta : float, default=1.0
    cv_folds : int, default=10
        Folds of the inner cross-validation that scores local models.
    base_estimator : estimator or None
        Binary learner with ``positive_proba``; defaults to L2 logistic
        regression with ``l2=1``.
    random_state : int, default=42
    ablation : AblationFlags or None
        Replace components by randomized controls (for analysis only).
    """

    def __init__(self, n_clusters=100, restart_p=0.3, avg_cluster_size=None, w=0.4, s=0.5,
                 n_neighbors=5, alpha=1.0, beta=1.0, cv_folds=10, base_estimator=None,
                 random_state=42, ablation=None):
        self.n_clusters = n_clusters
        self.restart_p = restart_p
        self.avg_cluster_size = avg_cluster_size
        self.w = w
        self.s = s
        self.n_neighbors = n_neighbors
        self.alpha = alpha
        self.beta = beta
        self.cv_folds = cv_folds
        self.base_estimator = base_estimator
        self.random_state = random_state
        self.ablation = ablation

    def ice_params(self) -> IceParams:
        return IceParams(
            L=self.n_clusters, p=self.restart_p, z=self.avg_cluster_size, w=self.w, s=self.s,
            N=self.n_neighbors, alpha=self.alpha, beta=self.beta, cv_folds=self.cv_folds,
            seed=self.random_state,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError(f"ICEClassifier is binary; got {len(self.classes_)} classes")
        Y = (y == self.classes_[1]).astype(np.int64)
        ds = Dataset(X, Y)
        self.model_ = train_ice(ds, self.ice_params(), self.base_estimator, self.ablation)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_model(cls, model: IceModel) -> "ICEClassifier":
        p = model.params
        est = cls(n_clusters=p.L, restart_p=p.p, avg_cluster_size=p.z, w=p.w, s=p.s,
                  n_neighbors=p.N, alpha=p.alpha, beta=p.beta, cv_folds=p.cv_folds,
                  random_state=p.seed, ablation=model.ablation)
        est.model_ = model
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = model.train_X.shape[1]
        return est

    def predict_details(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        return predict_batch(self.model_, X)

    def predict_proba(self, X):
        p1 = self.predict_details(X).proba
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        p1 = self.predict_details(X).proba
        return self.classes_[(p1 >= 0.5).astype(int)]

    def predict_instance(self, x):
        check_is_fitted(self, "model_")
        return predict_instance(x, self.model_)

    def resweep(self, w: float, s: float) -> "ICEClassifier":
        """New fitted estimator with re-derived associations for (w, s)."""
        check_is_fitted(self, "model_")
        est = copy.copy(self)
        est.w, est.s = w, s
        est.model_ = resweep_decision(self.model_, w, s)
        return est

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        save(self.model_, path)

    @classmethod
    def load(cls, path) -> "ICEClassifier":
        return cls.from_model(load(path))


__all__ = [
    "ICEClassifier",
    "fit",
    "load",
    "resweep_decision",
    "save",
    "with_prediction_params",
]
