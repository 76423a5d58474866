import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import blobs
from leakage import FitRecorder
from ice_ensemble.association import (
    AblationFlags,
    IceParams,
    build_decision_table,
    build_prediction_matrix,
    check_model,
    cluster_rng,
    train_ice,
)
from ice_ensemble.data import round_robin_folds
from ice_ensemble.exceptions import InvariantError
from ice_ensemble.graphcluster import ClusterSet, fuzzy_cluster
from ice_ensemble.learners import L2LogisticRegression, fit_or_constant


def brute_decision(E, clusters, w, s):
    Q, L = E.shape
    D = np.zeros((Q, L), dtype=int)
    for i in range(Q):
        whole = E[i, L - 1] - w
        for j in range(L):
            if j == L - 1:
                e = whole
            elif i in set(clusters[j]):
                e = E[i, j] - s
            else:
                e = E[i, j]
            D[i, j] = 1 if e <= whole else 0
    return D


def random_config(rng, Q, L):
    E = rng.random((Q, L))
    # coarse grid so exact ties occur
    E[rng.random((Q, L)) < 0.3] = rng.choice([0.0, 0.25, 0.5, 1.0])
    clusters = [np.flatnonzero(rng.random(Q) < 0.4) for _ in range(L - 1)] + [np.arange(Q)]
    return E, ClusterSet(clusters, z=1.0, centers=np.zeros(L - 1, dtype=np.int64))


def test_decision_example_row():
    E = np.array([[0.30, 0.70, 0.35]])
    m = np.array([[True, False, True]])
    assert build_decision_table(E, m, 0.4, 0.5).tolist() == [[1, 0, 1]]


def test_equality_is_inclusive():
    E = np.array([[0.3, 0.3]])
    assert build_decision_table(E, np.array([[False, True]]), 0.0, 0.0).tolist() == [[1, 1]]


def test_decision_table_does_not_mutate():
    E = np.array([[0.3, 0.7, 0.35]])
    before = E.copy()
    build_decision_table(E, np.array([[True, False, True]]))
    np.testing.assert_array_equal(E, before)


def test_decision_shape_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        build_decision_table(np.zeros((2, 3)), np.zeros((2, 2), dtype=bool))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 50), st.integers(2, 10),
       st.floats(0, 1), st.floats(0, 1))
def test_decision_matches_brute_force(seed, Q, L, w, s):
    E, cs = random_config(np.random.default_rng(seed), Q, L)
    D = build_decision_table(E, cs, w, s)
    np.testing.assert_array_equal(D, brute_decision(E, cs.clusters, w, s))
    assert np.all(D[:, -1] == 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5))
def test_decision_monotone(seed, w, s, delta):
    E, cs = random_config(np.random.default_rng(seed), 30, 6)
    mem = cs.membership()
    base = build_decision_table(E, mem, w, s)
    more_s = build_decision_table(E, mem, w, s + delta)
    assert np.all(more_s[mem] >= base[mem])
    more_w = build_decision_table(E, mem, w + delta, s)
    assert np.all(more_w <= base)
    # local dominance
    local = mem & (E <= E[:, -1:] + (s - w))
    assert np.all(base[local] == 1)


def test_remote_entries_equal_direct_prediction(small_ds):
    X, Y = small_ds.X, small_ds.Y
    cs, _ = fuzzy_cluster(X, L=6)
    P = build_prediction_matrix(X, Y, cs, cv_folds=5, seed=3)
    for j, c in enumerate(cs.clusters[:-1]):
        model = fit_or_constant(L2LogisticRegression(), X[c], Y[c])
        out = np.setdiff1d(np.arange(len(Y)), c)
        np.testing.assert_array_equal(P[out, j], model.positive_proba(X[out]))


def test_whole_column_oracle():
    """Column L-1 recomputed by hand: stratified folds from the same
    stream, one logistic fit per fold."""
    for seed in range(3):
        ds = blobs(18, 2, seed=seed)
        X, Y = ds.X, ds.Y
        cs, _ = fuzzy_cluster(X, L=4)
        P = build_prediction_matrix(X, Y, cs, cv_folds=4, seed=11)
        fold_of = round_robin_folds(Y, 4, cluster_rng(11, cs.L - 1))
        expect = np.empty(len(Y))
        for f in range(4):
            te = fold_of == f
            m = L2LogisticRegression().fit(X[~te], Y[~te])
            expect[te] = m.positive_proba(X[te])
        np.testing.assert_array_equal(P[:, -1], expect)


def test_small_cluster_uses_leave_one_out():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 2))
    Y = np.arange(12) % 2
    cs = ClusterSet([np.array([0, 1, 2]), np.arange(12)], z=3.0, centers=np.array([0]))
    rec = FitRecorder(X)
    build_prediction_matrix(X, Y, cs, cv_folds=10, seed=0, fit=rec)
    inner = [t for t, rows in rec.log if t < {0, 1, 2} and rows and set(rows) <= {0, 1, 2}]
    assert sorted(len(t) for t in inner) == [2, 2, 2]


@pytest.mark.parametrize("seed", range(3))
def test_no_leakage(seed):
    ds = blobs(40, 3, seed=seed)
    rec = FitRecorder(ds.X)
    cs, _ = fuzzy_cluster(ds.X, L=8)
    build_prediction_matrix(ds.X, ds.Y, cs, cv_folds=5, seed=seed, fit=rec)
    assert rec.violations() == []
    scored = {(i, t) for t, rows in rec.log for i in rows}
    for c in cs.clusters:
        for i in c:
            assert any(i in rows for t, rows in rec.log if t <= set(c))
    assert scored


def test_train_ice_invariants(small_ds):
    model = train_ice(small_ds, IceParams(L=10, cv_folds=5))
    assert model.L == 10 and len(model.pool) == 10
    assert np.all(model.decision[:, -1] == 1)
    assert np.all((model.errors >= 0) & (model.errors <= 1))
    model2 = train_ice(small_ds, IceParams(L=10, cv_folds=5))
    np.testing.assert_array_equal(model.decision, model2.decision)
    np.testing.assert_array_equal(model.errors, model2.errors)


def test_train_ice_l2(small_ds):
    model = train_ice(small_ds, IceParams(L=2))
    assert len(model.pool) == 2


def test_train_ice_single_class_cluster_gets_constant():
    X = np.vstack([np.random.default_rng(0).normal(size=(20, 2)), 50 + np.random.default_rng(1).normal(size=(20, 2))])
    Y = np.r_[np.arange(20) % 2, np.ones(20, dtype=int)]
    from ice_ensemble.data import Dataset
    model = train_ice(Dataset(X, Y), IceParams(L=6, z=10, cv_folds=5))
    kinds = {m.to_dict()["kind"] for m in model.pool}
    assert "constant" in kinds


def test_check_model_catches_broken_table(small_ds):
    model = train_ice(small_ds, IceParams(L=4, cv_folds=3))
    model.decision[0, -1] = 0
    with pytest.raises(InvariantError):
        check_model(model)


def test_c1_bags_match_cluster_sizes(small_ds):
    plain = train_ice(small_ds, IceParams(L=6, cv_folds=3))
    bagged = train_ice(small_ds, IceParams(L=6, cv_folds=3), ablation=AblationFlags(randomize_c1=True, seed=2))
    assert [int(w.sum()) for w in bagged.clusters.weights[:-1]] == plain.clusters.sizes()[:-1]


def test_c2_permutes_rows(small_ds):
    plain = train_ice(small_ds, IceParams(L=6, cv_folds=3))
    perm = train_ice(small_ds, IceParams(L=6, cv_folds=3), ablation=AblationFlags(randomize_c2=True, seed=2))
    assert not np.array_equal(perm.row_permutation, np.arange(plain.Q))
    np.testing.assert_array_equal(perm.decision, plain.decision[perm.row_permutation])


def test_params_validation():
    with pytest.raises(ValueError):
        IceParams(L=1)
    with pytest.raises(ValueError):
        IceParams(p=0)
    with pytest.raises(ValueError):
        IceParams(w=-0.1)
    assert json.loads(json.dumps(IceParams().to_dict()))["L"] == 100
