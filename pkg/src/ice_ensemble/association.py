"""Training: cluster the instances, fit one model per cluster, and decide
which models each training instance is associated with."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, ZScoreScaler, round_robin_folds
from .exceptions import InvariantError
from .graphcluster import ClusterSet, bootstrap_bags, fuzzy_cluster
from .learners import L2LogisticRegression, fit_or_constant


@dataclass
class IceParams:
    """ICE hyperparameters.  ``z=None`` means one third of the training size."""

    L: int = 100
    p: float = 0.3
    z: float | None = None
    w: float = 0.4
    s: float = 0.5
    N: int = 5
    alpha: float = 1.0
    beta: float = 1.0
    cv_folds: int = 10
    seed: int = 42
    rwr_tol: float = 1e-8
    rwr_max_iter: int = 200

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if self.z is not None and self.z < 1:
            raise ValueError("z must be >= 1")
        for name in ("w", "s", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AblationFlags:
    """Randomized stand-ins for the three ICE components.

    c1: clusters become bootstrap bags of the same sizes.
    c2: decision-table rows are permuted across instances.
    c3: neighbor lookup becomes uniform random sampling.
    """

    randomize_c1: bool = False
    randomize_c2: bool = False
    randomize_c3: bool = False
    seed: int = 0

    @property
    def code(self) -> str:
        parts = [f"C{k}" for k, on in enumerate(
            (self.randomize_c1, self.randomize_c2, self.randomize_c3), start=1) if on]
        return "+".join(parts) if parts else "none"


@dataclass
class IceModel:
    train_X: np.ndarray
    Y: np.ndarray
    clusters: ClusterSet
    pool: list
    decision: np.ndarray
    params: IceParams
    scaler: ZScoreScaler
    errors: np.ndarray | None = None
    row_permutation: np.ndarray | None = None
    ablation: AblationFlags | None = None
    feature_names: list[str] = field(default_factory=list)
    schema: object = None

    @property
    def L(self) -> int:
        return self.clusters.L

    @property
    def Q(self) -> int:
        return self.train_X.shape[0]


def sub_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    """Independent, reproducible RNG stream for (seed, keys...)."""
    return np.random.SeedSequence([int(seed), *[int(k) for k in keys]])


def cluster_rng(seed: int, j: int) -> np.random.Generator:
    return np.random.default_rng(sub_seed(seed, 1, j))


def _cluster_weights(clusters: ClusterSet, j: int):
    return None if clusters.weights is None else clusters.weights[j]


def fit_pool(X, Y, clusters: ClusterSet, base, fit=fit_or_constant) -> list:
    pool = []
    for j, members in enumerate(clusters.clusters):
        pool.append(fit(base, X[members], Y[members], _cluster_weights(clusters, j)))
    return pool


def inner_cv_predictions(X, Y, members, weights, base, cv_folds, rng, fit=fit_or_constant):
    """Out-of-fold class-1 probabilities for every member of one cluster."""
    members = np.asarray(members)
    out = np.empty(len(members))
    k = min(cv_folds, len(members))
    if k < 2:
        # a lone member cannot be predicted by a model that excludes it
        out[:] = 0.5
        return out
    fold_of = round_robin_folds(Y[members], k, rng)
    for f in range(k):
        test = fold_of == f
        train = ~test
        tr = members[train]
        sw = None if weights is None else weights[train]
        model = fit(base, X[tr], Y[tr], sw)
        out[test] = model.positive_proba(X[members[test]])
    return out


def build_prediction_matrix(
    X, Y, clusters: ClusterSet, base=None, cv_folds: int = 10, seed: int = 0,
    pool: list | None = None, fit=fit_or_constant,
) -> np.ndarray:
    """Q x L matrix of class-1 probabilities.

    Non-members of cluster j are scored by the model fit on all of c_j;
    members get out-of-fold predictions from a stratified CV inside c_j.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y)
    base = base if base is not None else L2LogisticRegression()
    if pool is None:
        pool = fit_pool(X, Y, clusters, base, fit)
    Q, L = X.shape[0], clusters.L
    P = np.empty((Q, L))
    for j, members in enumerate(clusters.clusters):
        outside = np.ones(Q, dtype=bool)
        outside[members] = False
        if outside.any():
            P[outside, j] = pool[j].positive_proba(X[outside])
        P[members, j] = inner_cv_predictions(
            X, Y, members, _cluster_weights(clusters, j), base, cv_folds,
            cluster_rng(seed, j), fit,
        )
    return P


def build_decision_table(E, membership, w: float = 0.4, s: float = 0.5) -> np.ndarray:
    """Associate instance i with model j when its adjusted error is no
    worse than the adjusted error of the whole model (last column).

    The whole model's error drops by ``w``; a local model's (i in c_j)
    drops by ``s``.  Works on a copy; ``membership`` is a boolean Q x L
    matrix or a ClusterSet.
    """
    E = np.asarray(E, dtype=float)
    if isinstance(membership, ClusterSet):
        membership = membership.membership()
    membership = np.asarray(membership, dtype=bool)
    if E.shape != membership.shape:
        raise ValueError(f"dimension mismatch: E {E.shape} vs membership {membership.shape}")
    adjusted = E - s * membership
    adjusted[:, -1] = E[:, -1] - w
    D = (adjusted <= adjusted[:, -1:]).astype(np.int8)
    return D


def check_model(model: IceModel) -> None:
    D = model.decision
    if D.shape != (model.Q, model.L):
        raise InvariantError(f"decision table shape {D.shape} != {(model.Q, model.L)}")
    if not np.all(D[:, -1] == 1):
        raise InvariantError("whole-model column of the decision table is not all ones")
    if len(model.pool) != model.L:
        raise InvariantError("pool size differs from cluster count")
    if model.clusters.clusters[-1].shape[0] != model.Q:
        raise InvariantError("last cluster is not the whole set")


def train_ice(dataset: Dataset, params: IceParams | None = None, base=None,
              ablation: AblationFlags | None = None, fit=fit_or_constant) -> IceModel:
    """Fit scaler, clusters, per-cluster models and the decision table."""
    params = params or IceParams()
    base = base if base is not None else L2LogisticRegression()
    scaler = ZScoreScaler().fit(dataset.X)
    X = scaler.transform(dataset.X)
    Y = dataset.Y

    clusters, _ = fuzzy_cluster(X, params.L, params.p, params.z, params.rwr_tol, params.rwr_max_iter)
    if ablation is not None and ablation.randomize_c1:
        sizes = clusters.sizes()[:-1]
        clusters = bootstrap_bags(sizes, X.shape[0], sub_seed(ablation.seed, 11))

    pool = fit_pool(X, Y, clusters, base, fit)
    P = build_prediction_matrix(X, Y, clusters, base, params.cv_folds, params.seed, pool, fit)
    E = np.abs(P - Y[:, None])
    D = build_decision_table(E, clusters.membership(), params.w, params.s)

    perm = None
    if ablation is not None and ablation.randomize_c2:
        perm = nonidentity_permutation(X.shape[0], sub_seed(ablation.seed, 12))
        D = D[perm]

    model = IceModel(
        train_X=X, Y=Y, clusters=clusters, pool=pool, decision=D, params=params,
        scaler=scaler, errors=E, row_permutation=perm, ablation=ablation,
        feature_names=list(dataset.feature_names), schema=dataset.schema,
    )
    check_model(model)
    return model


def nonidentity_permutation(n: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    if n > 1:
        while np.array_equal(perm, np.arange(n)):
            perm = rng.permutation(n)
    return perm
