import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from ice_ensemble.learners import (
    AdaBoostEnsemble,
    BaggingEnsemble,
    DecisionStump,
    L2LogisticRegression,
    PriorClassifier,
    fit_adaboost,
    fit_bagging,
    fit_constant,
    fit_logistic,
    fit_or_constant,
    fit_stump,
    model_from_dict,
)


def toy(seed=0, n=40, r=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, r))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(int)
    y[:2] = [0, 1]
    return X, y


def test_logistic_separable_direction():
    X = np.array([[-1.0], [-2.0], [1.0], [2.0]])
    m = fit_logistic(X, [0, 0, 1, 1], l2=1.0)
    p = m.positive_proba([[2.0], [-2.0]])
    assert p[0] > 0.5 > p[1]


def test_logistic_intercept_only_is_prior():
    m = fit_logistic(np.zeros((4, 2)), [1, 1, 1, 0])
    np.testing.assert_allclose(m.positive_proba(np.random.default_rng(0).normal(size=(5, 2))), 0.75,
                               atol=1e-10)


def test_logistic_strong_penalty_gives_prior():
    X, y = toy(1)
    X = X - X.mean(axis=0)
    m = fit_logistic(X, y, l2=1e9)
    assert np.max(np.abs(m.coef_)) < 1e-6
    np.testing.assert_allclose(m.positive_proba(X), y.mean(), atol=1e-6)


def test_logistic_single_class_rejected():
    with pytest.raises(ValueError):
        fit_logistic(np.ones((3, 1)), [1, 1, 1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 10.0))
def test_logistic_gradient_matches_finite_differences(seed, l2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 3))
    y = rng.integers(0, 2, 12)
    sw = rng.random(12) + 0.1
    m = L2LogisticRegression(l2=l2)
    theta = rng.normal(size=4)
    g = m.gradient(theta, X, y, sw)
    h = 1e-6
    fd = np.array([(m.objective(theta + h * e, X, y, sw) - m.objective(theta - h * e, X, y, sw)) / (2 * h)
                   for e in np.eye(4)])
    assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


def test_logistic_gradient_zero_at_optimum():
    X, y = toy(2)
    m = fit_logistic(X, y)
    theta = np.concatenate([[m.intercept_], m.coef_])
    assert np.linalg.norm(m.gradient(theta, X, y)) < 1e-6


def test_stump_threshold():
    s = fit_stump(np.array([[1.0], [2.0], [3.0], [4.0]]), [0, 0, 1, 1])
    assert s.threshold_ == 2.5 and s.feature_ == 0
    np.testing.assert_array_equal(s.positive_proba([[1.0], [2.0], [3.0], [4.0]]), [0.01, 0.01, 0.99, 0.99])


def test_stump_prefers_lower_feature_on_ties():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    assert fit_stump(X, [0, 0, 1, 1]).feature_ == 0


def test_stump_single_point():
    s = fit_stump(np.array([[3.0]]), [1])
    assert s.positive_proba([[3.0]])[0] == 0.99


def test_stump_weight_concentration():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 1, 0, 0])
    w = np.array([1.0, 100.0, 1.0, 1.0])
    assert fit_stump(X, y, w).predict(X[1:2])[0] == 1


def test_constant_examples():
    assert fit_constant([1, 1, 1, 0]).prior_ == 0.75
    assert fit_constant([1, 1]).prior_ == 0.99
    assert fit_constant([1, 0], [3, 1]).prior_ == 0.75


def test_fit_or_constant_falls_back():
    m = fit_or_constant(L2LogisticRegression(), np.ones((3, 1)), [0, 0, 0])
    assert isinstance(m, PriorClassifier) and m.prior_ == 0.01


def test_bagging_is_mean_of_members():
    X, y = toy(3)
    b = fit_bagging(X, y, n_bags=7, seed=5)
    np.testing.assert_array_equal(b.positive_proba(X),
                                  np.mean([m.positive_proba(X) for m in b.members_], axis=0))
    b2 = fit_bagging(X, y, n_bags=7, seed=5)
    assert json.dumps(b.to_dict()) == json.dumps(b2.to_dict())


def test_bagging_constant_members():
    b = BaggingEnsemble(n_bags=3)
    b.members_ = [PriorClassifier().fit(np.zeros((5, 1)), [1, 1, 1, 0, 0])] * 3
    np.testing.assert_allclose(b.positive_proba(np.zeros((2, 1))), 0.6)


def test_adaboost_perfect_first_round():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    a = fit_adaboost(X, [0, 0, 1, 1], base=DecisionStump())
    assert len(a.members_) == 1 and a.alphas_ == [2.0]
    p = a.positive_proba(X)
    assert np.all(p[2:] > 0.88) and np.all(p[:2] < 0.12)


def test_adaboost_abstains_to_prior():
    # every stump errs on half the weight: XOR-like labels on identical rows
    X = np.zeros((4, 1))
    a = fit_adaboost(X, [0, 1, 0, 1], base=DecisionStump())
    assert isinstance(a.members_[0], PriorClassifier) and a.alphas_ == []
    np.testing.assert_allclose(a.positive_proba(X), 0.5)


def test_adaboost_training_error_non_increasing():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(60, 2))
    y = ((X[:, 0] > 0.2) | (X[:, 1] > 0.5)).astype(int)
    errs = [np.mean(AdaBoostEnsemble(DecisionStump(), r).fit(X, y).predict(X) != y) for r in range(1, 11)]
    assert errs[-1] < errs[0]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


LEARNERS = [
    lambda: L2LogisticRegression(),
    lambda: DecisionStump(),
    lambda: PriorClassifier(),
    lambda: BaggingEnsemble(n_bags=5, random_state=1),
    lambda: AdaBoostEnsemble(DecisionStump(), n_rounds=5),
]


@pytest.mark.parametrize("make", LEARNERS)
def test_probabilities_bounded_far_outside(make):
    X, y = toy(4)
    m = make().fit(X, y)
    far = np.vstack([X * 1e6, -X * 1e6, np.full((1, 3), 1e300)])
    p = m.predict_proba(far)
    assert np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)


@pytest.mark.parametrize("make", LEARNERS)
def test_serialization_bit_exact(make):
    X, y = toy(5)
    m = make().fit(X, y)
    back = model_from_dict(json.loads(json.dumps(m.to_dict())))
    probes = np.random.default_rng(9).normal(size=(50, 3))
    np.testing.assert_array_equal(back.positive_proba(probes), m.positive_proba(probes))


@pytest.mark.parametrize("make", LEARNERS)
def test_sklearn_clone_and_params(make):
    m = make()
    c = clone(m)
    assert type(c) is type(m)
    assert set(c.get_params(deep=False)) == set(m.get_params(deep=False))


def test_unknown_kind():
    with pytest.raises(ValueError):
        model_from_dict({"kind": "svm"})
