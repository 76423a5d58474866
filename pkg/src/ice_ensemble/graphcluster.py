"""Overlapping clusters from random-walk affinities on a KNN graph.

Pipeline: pairwise distances -> symmetric KNN graph -> random walk with
restart (RWR) affinity per node -> furthest-point center selection ->
global affinity cutoff around each center.  No randomness anywhere; ties
always resolve to the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DataError

MIN_CLUSTER_SIZE = 8


@dataclass
class AffinityArtifacts:
    S: np.ndarray
    G: np.ndarray
    W: np.ndarray
    T: np.ndarray


@dataclass
class ClusterSet:
    """L clusters of instance indices; the last one is always every instance.

    ``weights`` is only set for bootstrap bags, where it holds the draw count
    of each member (aligned with ``clusters``).
    """

    clusters: list[np.ndarray]
    z: float
    centers: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    weights: list[np.ndarray] | None = None
    requested_L: int | None = None

    @property
    def L(self) -> int:
        return len(self.clusters)

    @property
    def Q(self) -> int:
        return len(self.clusters[-1])

    def sizes(self) -> list[int]:
        return [len(c) for c in self.clusters]

    def membership(self) -> np.ndarray:
        """Boolean Q x L matrix, True where instance i belongs to cluster j."""
        m = np.zeros((self.Q, self.L), dtype=bool)
        for j, c in enumerate(self.clusters):
            m[c, j] = True
        return m


def _neighbor_count(Q: int) -> int:
    return max(1, min(Q - 1, math.ceil(math.log10(Q))))


def knn_graph(X) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise Euclidean distances and the union-symmetrized KNN adjacency.

    Each node keeps its ceil(log10 Q) nearest other nodes.
    """
    X = np.asarray(X, dtype=float)
    Q = X.shape[0]
    if Q < 2:
        raise DataError("knn_graph needs at least 2 instances")
    S = cdist(X, X)
    k = _neighbor_count(Q)
    masked = S.copy()
    np.fill_diagonal(masked, np.inf)
    nbrs = np.argsort(masked, axis=1, kind="stable")[:, :k]
    G = np.zeros((Q, Q), dtype=np.int8)
    rows = np.repeat(np.arange(Q), k)
    G[rows, nbrs.ravel()] = 1
    G = np.maximum(G, G.T)
    return S, G


def rwr_affinity(G, p: float = 0.3, tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    """Random walk with restart from every node, by power iteration.

    Row i of the result is the stationary distribution of a walk that
    jumps back to node i with probability ``p`` at each step.  All rows are
    iterated together from the identity until the largest entry change
    drops below ``tol``.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"restart probability must be in (0, 1], got {p}")
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(G, G.T):
        raise ValueError("adjacency must be symmetric")
    G = G.copy()
    isolated = G.sum(axis=1) == 0
    G[isolated, isolated] = 1.0
    P = G / G.sum(axis=1, keepdims=True)

    Q = G.shape[0]
    restart = p * np.eye(Q)
    W = np.eye(Q)
    for _ in range(max_iter):
        W_next = restart + (1.0 - p) * (W @ P)
        delta = np.max(np.abs(W_next - W))
        W = W_next
        if delta < tol:
            break
    return W


def select_centers(W, m: int) -> np.ndarray:
    """Pick m distinct centers: the node with the largest incoming
    affinity first, then repeatedly the node least connected (symmetric
    affinity summed over chosen centers) to the centers so far."""
    W = np.asarray(W, dtype=float)
    Q = W.shape[0]
    if m < 1:
        raise ValueError("need at least one center")
    if m > Q:
        raise ValueError(f"cannot pick {m} centers from {Q} nodes")
    centers = [int(np.argmax(W.sum(axis=0)))]
    taken = np.zeros(Q, dtype=bool)
    taken[centers[0]] = True
    closeness = W[centers[0], :] + W[:, centers[0]]
    for _ in range(1, m):
        score = np.where(taken, np.inf, closeness)
        t = int(np.argmin(score))
        centers.append(t)
        taken[t] = True
        closeness = closeness + W[t, :] + W[:, t]
    return np.array(centers, dtype=np.int64)


def cut_clusters(W, T, z: float, Q: int | None = None, min_size: int = MIN_CLUSTER_SIZE) -> ClusterSet:
    """Threshold the center rows of W so clusters average about z members.

    The top floor(len(T) * z) off-center entries over all center rows are
    kept (ties: lower row, then lower column); each cluster is its kept
    entries plus its center, padded to ``min_size`` from the center row in
    affinity order.  The whole set is appended as the last cluster.
    """
    W = np.asarray(W, dtype=float)
    T = np.asarray(T, dtype=np.int64)
    Q = W.shape[0] if Q is None else Q
    if len(T) == 0:
        raise ValueError("need at least one center")
    if not 1 <= z <= Q:
        raise ValueError(f"average cluster size z must be in [1, {Q}], got {z}")
    n_centers = len(T)
    rows = W[T, :].copy()
    rows[np.arange(n_centers), T] = -np.inf
    n_keep = min(int(math.floor(n_centers * z)), n_centers * (Q - 1))

    # global order by (-value, row, col); the flat index encodes (row, col)
    flat = rows.ravel()
    order = np.lexsort((np.arange(flat.size), -flat))
    marked = np.zeros(flat.size, dtype=bool)
    marked[order[:n_keep]] = True
    marked = marked.reshape(n_centers, Q)

    floor_size = min(min_size, Q)
    clusters = []
    for j, t in enumerate(T):
        row_order = np.lexsort((np.arange(Q), -rows[j]))
        row_order = row_order[row_order != t]
        n_members = max(int(marked[j].sum()), floor_size - 1)
        # marked entries of a row are a prefix of its own affinity order
        members = np.concatenate(([t], row_order[:n_members]))
        clusters.append(np.sort(members))
    clusters.append(np.arange(Q))
    return ClusterSet(clusters=clusters, z=float(z), centers=T.copy())


def default_z(Q: int) -> float:
    return Q / 3.0


def fuzzy_cluster(
    X,
    L: int = 100,
    p: float = 0.3,
    z: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 200,
    min_size: int = MIN_CLUSTER_SIZE,
) -> tuple[ClusterSet, AffinityArtifacts]:
    """Full overlapping-clustering pipeline; returns clusters and the
    intermediate matrices.  If L - 1 exceeds Q the center count is capped
    at Q and the returned ClusterSet records the requested L."""
    if L < 2:
        raise ValueError("L must be >= 2")
    X = np.asarray(X, dtype=float)
    Q = X.shape[0]
    S, G = knn_graph(X)
    W = rwr_affinity(G, p, tol, max_iter)
    m = min(L - 1, Q)
    T = select_centers(W, m)
    if z is None:
        z = default_z(Q)
    z = min(max(float(z), 1.0), float(Q))
    cs = cut_clusters(W, T, z, Q, min_size=min_size)
    cs.requested_L = L
    return cs, AffinityArtifacts(S=S, G=G, W=W, T=T)


def bootstrap_bags(sizes, Q: int, seed) -> ClusterSet:
    """Random stand-in for fuzzy clusters: bag j draws sizes[j] instances
    with replacement.  Members are the distinct draws; draw counts become
    instance weights.  The whole set is appended last."""
    rng = np.random.default_rng(seed)
    clusters, weights = [], []
    for size in sizes:
        draws = rng.integers(0, Q, size=int(size))
        members, counts = np.unique(draws, return_counts=True)
        clusters.append(members)
        weights.append(counts.astype(float))
    clusters.append(np.arange(Q))
    weights.append(np.ones(Q))
    return ClusterSet(clusters=clusters, z=float(np.mean(sizes)) if len(sizes) else 0.0,
                      weights=weights, requested_L=len(sizes) + 1)
