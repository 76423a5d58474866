"""Deterministic binary base learners.

Every learner follows the scikit-learn classifier protocol
(``fit(X, y, sample_weight=None)``, ``predict_proba``) and additionally
exposes ``positive_proba`` (1-D class-1 probability) and ``to_dict`` for
JSON persistence.  :func:`model_from_dict` restores any of them.
"""

from __future__ import annotations

import copy

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted

PROBA_FLOOR = 0.01
ALPHA_CAP = 2.0


def _weights(sample_weight, n: int) -> np.ndarray:
    if sample_weight is None:
        return np.ones(n)
    w = np.asarray(sample_weight, dtype=float)
    if w.shape != (n,):
        raise ValueError("sample_weight must have one entry per row")
    if np.any(w < 0):
        raise ValueError("sample_weight must be non-negative")
    return w


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, np.ndarray) and X.dtype == np.float64 and X.ndim == 2:
        return X
    return check_array(X, dtype=float)


def spawn(base):
    """Unfitted copy of ``base``; cheaper than ``sklearn.base.clone`` for
    the thousands of small fits ICE performs."""
    if isinstance(base, _Base):
        new = copy.copy(base)
        new.__dict__ = {k: v for k, v in base.__dict__.items() if not k.endswith("_")}
        return new
    return clone(base)


def has_both_classes(y, sample_weight=None) -> bool:
    y = np.asarray(y)
    w = _weights(sample_weight, len(y))
    return bool(w[y == 1].sum() > 0 and w[y == 0].sum() > 0)


class _Base(ClassifierMixin, BaseEstimator):
    kind = "abstract"

    def positive_proba(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, X) -> np.ndarray:
        p1 = self.positive_proba(X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.positive_proba(X) >= 0.5).astype(np.int64)

    def _set_classes(self):
        self.classes_ = np.array([0, 1])


class PriorClassifier(_Base):
    """Predicts the weighted positive-class frequency everywhere."""

    kind = "constant"

    def fit(self, X, y, sample_weight=None):
        y = np.asarray(y)
        if len(y) == 0:
            raise ValueError("cannot fit a prior on zero instances")
        w = _weights(sample_weight, len(y))
        total = w.sum()
        prior = w[y == 1].sum() / total if total > 0 else 0.5
        self.prior_ = float(np.clip(prior, PROBA_FLOOR, 1.0 - PROBA_FLOOR))
        self._set_classes()
        return self

    def positive_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "prior_")
        return np.full(np.asarray(X).shape[0], self.prior_)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "prior": self.prior_}

    @classmethod
    def _from_dict(cls, d):
        m = cls()
        m.prior_ = float(d["prior"])
        m._set_classes()
        return m


class L2LogisticRegression(_Base):
    """Logistic regression with an L2 penalty on the coefficients.

    Minimizes the weighted negative log-likelihood plus
    ``l2 / 2 * ||coef||**2`` (intercept unpenalized) by Newton's method
    with step halving, starting from all zeros.
    """

    kind = "logistic"

    def __init__(self, l2: float = 1.0, max_iter: int = 100, tol: float = 1e-8):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    @staticmethod
    def _augment(X):
        X = np.asarray(X, dtype=float)
        Xa = np.empty((X.shape[0], X.shape[1] + 1))
        Xa[:, 0] = 1.0
        Xa[:, 1:] = X
        return Xa

    def _loss(self, theta, Xa, y, w):
        z = Xa @ theta
        # log(1 + e^z) - y z, computed stably
        nll = np.sum(w * (np.logaddexp(0.0, z) - y * z))
        return nll + 0.5 * self.l2 * np.dot(theta[1:], theta[1:])

    def objective(self, theta, X, y, sample_weight=None) -> float:
        """Penalized loss at ``theta = [intercept, *coef]``."""
        y = np.asarray(y, dtype=float)
        return float(self._loss(np.asarray(theta, float), self._augment(X), y, _weights(sample_weight, len(y))))

    def gradient(self, theta, X, y, sample_weight=None) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        w = _weights(sample_weight, len(y))
        Xa = self._augment(X)
        theta = np.asarray(theta, float)
        g = Xa.T @ (w * (expit(Xa @ theta) - y))
        g[1:] += self.l2 * theta[1:]
        return g

    def fit(self, X, y, sample_weight=None):
        X = _as_matrix(X)
        y = np.asarray(y, dtype=float)
        w = _weights(sample_weight, len(y))
        if not has_both_classes(y, w):
            raise ValueError("single-class input: logistic regression needs both classes")
        r = X.shape[1]
        Xa = self._augment(X)
        ridge = np.full(r + 1, float(self.l2) + 1e-12)
        ridge[0] = 1e-12
        diag = np.arange(r + 1)

        theta = np.zeros(r + 1)
        loss = self._loss(theta, Xa, y, w)
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            mu = expit(Xa @ theta)
            grad = Xa.T @ (w * (mu - y))
            grad[1:] += self.l2 * theta[1:]
            s = w * mu * (1.0 - mu)
            H = (Xa.T * s) @ Xa
            H[diag, diag] += ridge
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, grad, rcond=None)[0]
            t = 1.0
            while True:
                cand = theta - t * step
                cand_loss = self._loss(cand, Xa, y, w)
                if cand_loss <= loss or t < 1e-10:
                    break
                t *= 0.5
            moved = np.max(np.abs(cand - theta))
            theta, loss = cand, cand_loss
            if moved < self.tol:
                break
        self.intercept_ = float(theta[0])
        self.coef_ = theta[1:].copy()
        self.n_iter_ = n_iter
        self.n_features_in_ = r
        self._set_classes()
        return self

    def positive_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        return expit(X @ self.coef_ + self.intercept_)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "l2": self.l2,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
        }

    @classmethod
    def _from_dict(cls, d):
        m = cls(l2=d["l2"], max_iter=d["max_iter"], tol=d["tol"])
        m.coef_ = np.array(d["coef"], dtype=float)
        m.intercept_ = float(d["intercept"])
        m.n_features_in_ = m.coef_.shape[0]
        m._set_classes()
        return m


class DecisionStump(_Base):
    """Depth-1 tree chosen by exhaustive search over features and
    midpoints between consecutive distinct values.

    Outputs are smoothed to 0.01 / 0.99.  Among equally good splits the
    lower feature index wins, then the lower threshold, then the
    orientation "above threshold means class 1".
    """

    kind = "stump"

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, dtype=float)
        y = np.asarray(y)
        w = _weights(sample_weight, len(y))
        if len(y) == 0:
            raise ValueError("cannot fit a stump on zero instances")
        pos_total = w[y == 1].sum()
        neg_total = w[y == 0].sum()

        best = None
        for f in range(X.shape[1]):
            order = np.argsort(X[:, f], kind="stable")
            xs, ys, ws = X[order, f], y[order], w[order]
            pos_left = np.cumsum(ws * (ys == 1))[:-1]
            neg_left = np.cumsum(ws * (ys == 0))[:-1]
            distinct = xs[1:] > xs[:-1]
            if not distinct.any():
                continue
            thresholds = 0.5 * (xs[1:] + xs[:-1])
            # above -> class 1: errors are positives left plus negatives right
            err_up = pos_left + (neg_total - neg_left)
            err_down = neg_left + (pos_total - pos_left)
            for err, polarity in ((err_up, 1), (err_down, 0)):
                cand = np.where(distinct, err, np.inf)
                k = int(np.argmin(cand))
                key = (cand[k], f, thresholds[k], 1 - polarity)
                if best is None or key < (best[0], best[1], best[2], 1 - best[3]):
                    best = (cand[k], f, thresholds[k], polarity)
        if best is None:
            # no split exists: predict the weighted majority everywhere
            best = (0.0, 0, -np.inf, 1 if pos_total >= neg_total else 0)
        _, self.feature_, self.threshold_, self.polarity_ = best
        self.feature_ = int(self.feature_)
        self.threshold_ = float(self.threshold_)
        self.polarity_ = int(self.polarity_)
        self._set_classes()
        return self

    def positive_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "feature_")
        X = np.asarray(X, dtype=float)
        above = X[:, self.feature_] > self.threshold_
        is_one = above if self.polarity_ == 1 else ~above
        return np.where(is_one, 1.0 - PROBA_FLOOR, PROBA_FLOOR)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "feature": self.feature_,
            "threshold": self.threshold_,
            "polarity": self.polarity_,
        }

    @classmethod
    def _from_dict(cls, d):
        m = cls()
        m.feature_ = int(d["feature"])
        m.threshold_ = float(d["threshold"])
        m.polarity_ = int(d["polarity"])
        m._set_classes()
        return m


def fit_or_constant(base, X, y, sample_weight=None):
    """Fit a fresh clone of ``base``; fall back to the prior when the
    (weighted) labels hold a single class."""
    if has_both_classes(y, sample_weight):
        return spawn(base).fit(X, y, sample_weight=sample_weight)
    return PriorClassifier().fit(X, y, sample_weight=sample_weight)


class BaggingEnsemble(_Base):
    """Bootstrap aggregation; the probability is the mean over members."""

    kind = "bagging"

    def __init__(self, base=None, n_bags: int = 100, random_state=0):
        self.base = base
        self.n_bags = n_bags
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        if self.n_bags < 1:
            raise ValueError("n_bags must be >= 1")
        X = check_array(X, dtype=float)
        y = np.asarray(y)
        base = self.base if self.base is not None else L2LogisticRegression()
        rng = np.random.default_rng(self.random_state)
        n = len(y)
        members = []
        for _ in range(self.n_bags):
            idx = rng.integers(0, n, size=n)
            sw = None if sample_weight is None else np.asarray(sample_weight)[idx]
            members.append(fit_or_constant(base, X[idx], y[idx], sw))
        self.members_ = members
        self._set_classes()
        return self

    def positive_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "members_")
        return np.mean([m.positive_proba(X) for m in self.members_], axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_bags": self.n_bags,
            "random_state": self.random_state,
            "members": [m.to_dict() for m in self.members_],
        }

    @classmethod
    def _from_dict(cls, d):
        m = cls(n_bags=d["n_bags"], random_state=d["random_state"])
        m.members_ = [model_from_dict(x) for x in d["members"]]
        m._set_classes()
        return m


class AdaBoostEnsemble(_Base):
    """Discrete AdaBoost on hard-thresholded member outputs.

    Stops early when a round's weighted error reaches 0.5 (that member is
    discarded) or hits 0 (that member is kept with weight ``ALPHA_CAP``).
    Probability is ``sigmoid(2 * sum(alpha_t * h_t(x)))`` with h in {-1, +1}.
    """

    kind = "adaboost"

    def __init__(self, base=None, n_rounds: int = 100):
        self.base = base
        self.n_rounds = n_rounds

    def fit(self, X, y, sample_weight=None):
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        X = check_array(X, dtype=float)
        y = np.asarray(y)
        base = self.base if self.base is not None else L2LogisticRegression()
        w = _weights(sample_weight, len(y)).copy()
        w /= w.sum()
        signs = np.where(y == 1, 1.0, -1.0)
        members, alphas = [], []
        self.weight_history_ = []
        for _ in range(self.n_rounds):
            model = fit_or_constant(base, X, y, w)
            h = np.where(model.positive_proba(X) >= 0.5, 1.0, -1.0)
            err = float(w[h != signs].sum())
            if err >= 0.5:
                break
            if err <= 0.0:
                members.append(model)
                alphas.append(ALPHA_CAP)
                break
            alpha = 0.5 * np.log((1.0 - err) / err)
            members.append(model)
            alphas.append(float(alpha))
            w = w * np.exp(-alpha * signs * h)
            w /= w.sum()
            self.weight_history_.append(w.copy())
        if not members:
            members = [PriorClassifier().fit(X, y, sample_weight=sample_weight)]
            alphas = []
        self.members_ = members
        self.alphas_ = alphas
        self._set_classes()
        return self

    def positive_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "members_")
        if not self.alphas_:
            return self.members_[0].positive_proba(X)
        score = np.zeros(np.asarray(X).shape[0])
        for a, m in zip(self.alphas_, self.members_):
            score += a * np.where(m.positive_proba(X) >= 0.5, 1.0, -1.0)
        return expit(2.0 * score)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_rounds": self.n_rounds,
            "alphas": list(self.alphas_),
            "members": [m.to_dict() for m in self.members_],
        }

    @classmethod
    def _from_dict(cls, d):
        m = cls(n_rounds=d["n_rounds"])
        m.members_ = [model_from_dict(x) for x in d["members"]]
        m.alphas_ = [float(a) for a in d["alphas"]]
        m._set_classes()
        return m


_KINDS = {
    cls.kind: cls
    for cls in (PriorClassifier, L2LogisticRegression, DecisionStump, BaggingEnsemble, AdaBoostEnsemble)
}


def model_from_dict(d: dict):
    try:
        cls = _KINDS[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {d.get('kind')!r}") from None
    return cls._from_dict(d)


def fit_logistic(X, y, sample_weight=None, l2=1.0, max_iter=100, tol=1e-8):
    return L2LogisticRegression(l2=l2, max_iter=max_iter, tol=tol).fit(X, y, sample_weight)


def fit_stump(X, y, sample_weight=None):
    return DecisionStump().fit(X, y, sample_weight)


def fit_bagging(X, y, base=None, n_bags=100, seed=0):
    return BaggingEnsemble(base=base, n_bags=n_bags, random_state=seed).fit(X, y)


def fit_adaboost(X, y, base=None, n_rounds=100):
    return AdaBoostEnsemble(base=base, n_rounds=n_rounds).fit(X, y)


def fit_constant(y, sample_weight=None):
    y = np.asarray(y)
    return PriorClassifier().fit(np.zeros((len(y), 0)), y, sample_weight)
