"""Instrumentation shared by the association tests and the acceptance
suite: a ``fit`` hook that records which training rows each model saw and
which rows it was later asked to score."""

import numpy as np

from ice_ensemble.learners import fit_or_constant


class _Recorded:
    def __init__(self, model, trained_on, log, row_of):
        self._model = model
        self.trained_on = trained_on
        self._log = log
        self._row_of = row_of

    def positive_proba(self, X):
        rows = [self._row_of[r.tobytes()] for r in np.asarray(X, dtype=float)]
        self._log.append((self.trained_on, rows))
        return self._model.positive_proba(X)


class FitRecorder:
    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        self.row_of = {r.tobytes(): i for i, r in enumerate(X)}
        if len(self.row_of) != len(X):
            raise ValueError("rows must be distinct for the audit")
        self.log = []

    def __call__(self, base, X, y, sample_weight=None):
        trained_on = frozenset(self.row_of[r.tobytes()] for r in np.asarray(X, dtype=float))
        model = fit_or_constant(base, X, y, sample_weight)
        return _Recorded(model, trained_on, self.log, self.row_of)

    def violations(self):
        return [(sorted(t), i) for t, rows in self.log for i in rows if i in t]
