"""Prediction: neighbor lookup, model collection and weighted combination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .association import IceModel, sub_seed
from .exceptions import DataError


@dataclass
class PredictionContext:
    neighbor_indices: list[int]
    selected_models: list[int]
    partial_probs: list[float]
    whole_prob: float
    final_prob: float
    fallback: bool = False

    @property
    def M(self) -> int:
        return len(self.selected_models)

    @property
    def unique_models(self) -> int:
        return len(set(self.selected_models))


def find_neighbors(x, train_X, N: int) -> np.ndarray:
    """Indices of the N training rows closest to x (ties: lower index)."""
    train_X = np.asarray(train_X, dtype=float)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != train_X.shape[1]:
        raise DataError(f"dimension mismatch: x has {x.shape[1]} features, train has {train_X.shape[1]}")
    if N < 1:
        raise ValueError("N must be >= 1")
    d = cdist(x, train_X)[0]
    return np.argsort(d, kind="stable")[:N]


def collect_models(decision, neighbors) -> list[int]:
    """Partial models associated with any neighbor, one copy per neighbor
    that selects it.  The whole model (last column) is left out."""
    D = np.asarray(decision)
    out = []
    for k in neighbors:
        out.extend(int(j) for j in np.flatnonzero(D[k, :-1]))
    return out


def combine(partial_probs, whole_prob: float, N: int, alpha: float = 1.0, beta: float = 1.0) -> float:
    """Blend partial-model probabilities with the whole model:

        (sum(partial) + (alpha*M + beta*N) * whole) / ((alpha + 1)*M + beta*N)

    If the denominator is zero (no partial models and beta == 0) the whole
    model's probability is returned.
    """
    partial = np.asarray(partial_probs, dtype=float)
    M = partial.size
    denom = (alpha + 1.0) * M + beta * N
    if denom == 0:
        return float(whole_prob)
    return float((partial.sum() + (alpha * M + beta * N) * whole_prob) / denom)


def _neighbor_matrix(model: IceModel, Xn: np.ndarray) -> np.ndarray:
    N = min(model.params.N, model.Q)
    ab = model.ablation
    if ab is not None and ab.randomize_c3:
        rng = np.random.default_rng(sub_seed(ab.seed, 13))
        return np.array([rng.choice(model.Q, size=N, replace=False) for _ in range(Xn.shape[0])],
                        dtype=np.int64).reshape(Xn.shape[0], N)
    d = cdist(Xn, model.train_X)
    return np.argsort(d, axis=1, kind="stable")[:, :N]


def _normalize(model: IceModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.scaler.n_features_in_:
        raise DataError(
            f"dimension mismatch: model expects {model.scaler.n_features_in_} features, got {X.shape[1]}"
        )
    return model.scaler.transform(X)


@dataclass
class BatchPrediction:
    proba: np.ndarray
    M: np.ndarray
    unique_models: np.ndarray
    fallback: np.ndarray


def selection_counts(model: IceModel, Xn: np.ndarray) -> np.ndarray:
    """counts[t, j]: how many neighbors of normalized row t select partial
    model j."""
    nbrs = _neighbor_matrix(model, Xn)
    partial_cols = model.decision[:, :-1].astype(np.int64)
    return partial_cols[nbrs].sum(axis=1)


def predict_normalized(model: IceModel, Xn: np.ndarray) -> BatchPrediction:
    N = min(model.params.N, model.Q)
    counts = selection_counts(model, Xn)
    probs = np.column_stack([m.positive_proba(Xn) for m in model.pool])
    M = counts.sum(axis=1).astype(float)
    a, b = model.params.alpha, model.params.beta
    whole = probs[:, -1]
    num = (counts * probs[:, :-1]).sum(axis=1) + (a * M + b * N) * whole
    denom = (a + 1.0) * M + b * N
    fallback = denom == 0
    out = np.where(fallback, whole, num / np.where(fallback, 1.0, denom))
    return BatchPrediction(out, M.astype(np.int64), (counts > 0).sum(axis=1), fallback)


def predict_batch(model: IceModel, X) -> BatchPrediction:
    """Vectorized prediction for many raw rows."""
    return predict_normalized(model, _normalize(model, X))


def predict_instance(x, model: IceModel) -> tuple[float, PredictionContext]:
    """Predict one raw feature vector and report how the answer was built."""
    xn = _normalize(model, x)
    nbrs = _neighbor_matrix(model, xn)[0]
    selected = collect_models(model.decision, nbrs)
    partial = [float(model.pool[j].positive_proba(xn)[0]) for j in selected]
    whole = float(model.pool[-1].positive_proba(xn)[0])
    N = len(nbrs)
    p = combine(partial, whole, N, model.params.alpha, model.params.beta)
    fallback = len(partial) == 0 and model.params.beta * N == 0
    ctx = PredictionContext(
        neighbor_indices=[int(k) for k in nbrs],
        selected_models=selected,
        partial_probs=partial,
        whole_prob=whole,
        final_prob=p,
        fallback=fallback,
    )
    return p, ctx
