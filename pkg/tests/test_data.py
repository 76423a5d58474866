import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ice_ensemble.data import (
    Dataset,
    ZScoreScaler,
    encode_nominal,
    load_csv,
    load_dataset,
    stratified_folds,
    zscore_fit_apply,
)
from ice_ensemble.exceptions import DataError


def test_label_map_is_lexicographic(write_csv):
    raw = load_csv(write_csv("a,b,label\n1,2,yes\n3,4,no\n5,6,yes\n"))
    assert raw.label_map == {"no": 0, "yes": 1}
    assert raw.labels.tolist() == [1, 0, 1]


def test_three_labels_rejected(write_csv):
    with pytest.raises(DataError, match="non-binary label"):
        load_csv(write_csv("a,label\n1,x\n2,y\n3,z\n"))


def test_numeric_inference_and_override(write_csv):
    p = write_csv("a,b,label\n1,u,0\n2.5,v,1\n")
    raw = load_csv(p)
    assert dict(raw.columns) == {"a": "numeric", "b": "nominal"}
    raw = load_csv(p, column_kinds={"a": "nominal"})
    assert dict(raw.columns)["a"] == "nominal"


@pytest.mark.parametrize("text,msg", [
    ("", "empty table"),
    ("a,label\n", "empty table"),
    ("a,b\n1,2\n", "missing label column"),
    ("a,label\n1,0\n2\n", "ragged rows"),
    ("a,label\n1,0\n,1\n", "missing cell"),
])
def test_malformed_csv(write_csv, text, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(write_csv(text))


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="missing file"):
        load_csv(tmp_path / "nope.csv")


def test_onehot_order_and_drop(write_csv):
    p = write_csv("c,x,label\nred,1,0\ngreen,2,1\nblue,3,0\nred,4,1\n")
    ds = encode_nominal(load_csv(p), "onehot")
    assert ds.feature_names == ["c=blue", "c=green", "c=red", "x"]
    np.testing.assert_array_equal(ds.X[:, :3].sum(axis=1), 1.0)
    ds = encode_nominal(load_csv(p), "drop")
    assert ds.feature_names == ["x"]


def test_all_nominal_drop_errors(write_csv):
    p = write_csv("c,label\nred,0\ngreen,1\n")
    with pytest.raises(DataError, match="no features remain"):
        load_dataset(p, nominal="drop")


def test_schema_encodes_unseen_category_as_zeros(write_csv):
    ds = load_dataset(write_csv("c,label\nred,0\ngreen,1\n"))
    raw = load_csv(write_csv("c,label\npurple,0\nred,1\n", "t.csv"))
    np.testing.assert_array_equal(ds.schema.transform(raw), [[0, 0], [0, 1]])


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.array([[1.0], [np.nan]]), [0, 1])
    with pytest.raises(DataError):
        Dataset(np.ones((3, 1)), [1, 1, 1])


def test_zscore_examples():
    sc, tr, other = zscore_fit_apply([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]], [[4.0, 7.0]])
    np.testing.assert_allclose(sc.means_, [2, 5])
    np.testing.assert_allclose(tr[:, 0], [-1, 0, 1])
    np.testing.assert_array_equal(tr[:, 1], 0.0)
    assert other[0, 0] == 2.0


def test_zscore_dimension_mismatch():
    sc = ZScoreScaler().fit(np.ones((3, 2)))
    with pytest.raises(DataError, match="dimension mismatch"):
        sc.transform(np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 40), st.integers(1, 5))
def test_zscore_moments(seed, n, r):
    X = np.random.default_rng(seed).normal(size=(n, r)) * 7 + 3
    Z = ZScoreScaler().fit(X).transform(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(Z.std(axis=0, ddof=1) - 1) < 1e-9)


def test_perfect_stratification():
    Y = np.array([1] * 10 + [0] * 10)
    fa = stratified_folds(Y, 10, seed=3)
    for f in range(10):
        _, test = fa.split(f)
        assert sorted(Y[test].tolist()) == [0, 1]
    np.testing.assert_array_equal(fa.fold_of, stratified_folds(Y, 10, seed=3).fold_of)


def test_fold_reduction():
    Y = np.array([1] * 4 + [0] * 20)
    fa = stratified_folds(Y, 10)
    assert fa.k == 4 and fa.requested_k == 10 and fa.reduced


def test_fold_count_too_small():
    with pytest.raises(DataError):
        stratified_folds([0, 1, 0, 1], 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 60), st.integers(2, 60), st.integers(2, 12))
def test_stratification_balance(seed, n0, n1, k):
    Y = np.array([0] * n0 + [1] * n1)
    fa = stratified_folds(Y, k, seed)
    for c, n in ((0, n0), (1, n1)):
        counts = np.bincount(fa.fold_of[Y == c], minlength=fa.k)
        assert np.all(np.abs(counts - n / fa.k) < 1)
