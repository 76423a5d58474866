"""Dataset ingestion, nominal encoding, z-score scaling and stratified folds."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DataError

NUMERIC = "numeric"
NOMINAL = "nominal"


@dataclass
class RawTable:
    """Rows of string cells as read from disk, before any encoding.

    ``columns`` lists every column except the label as ``(name, kind)``.
    ``label_map`` maps each raw label string to 0 or 1.
    """

    columns: list[tuple[str, str]]
    rows: list[dict[str, str]]
    label_column: str
    label_map: dict[str, int] = field(default_factory=dict)

    @property
    def labels(self) -> np.ndarray:
        return np.array([self.label_map[r[self.label_column]] for r in self.rows], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class FeatureSchema:
    """How raw columns become numeric features; reused to encode new data."""

    mode: str
    # (name, kind, categories); categories is empty for numeric columns
    entries: list[tuple[str, str, list[str]]]

    @property
    def feature_names(self) -> list[str]:
        names = []
        for name, kind, cats in self.entries:
            if kind == NUMERIC:
                names.append(name)
            else:
                names.extend(f"{name}={c}" for c in cats)
        return names

    def transform(self, raw: RawTable) -> np.ndarray:
        present = {name for name, _ in raw.columns}
        blocks = []
        for name, kind, cats in self.entries:
            if name not in present:
                raise DataError(f"missing feature column {name!r}")
            values = [r[name] for r in raw.rows]
            if kind == NUMERIC:
                try:
                    blocks.append(np.array([float(v) for v in values])[:, None])
                except ValueError as exc:
                    raise DataError(f"column {name!r}: non-numeric cell ({exc})") from None
            else:
                index = {c: k for k, c in enumerate(cats)}
                block = np.zeros((len(values), len(cats)))
                for row, v in enumerate(values):
                    # unseen categories encode as all zeros
                    if v in index:
                        block[row, index[v]] = 1.0
                blocks.append(block)
        if not blocks:
            return np.zeros((len(raw.rows), 0))
        return np.hstack(blocks)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "entries": [list(e) for e in self.entries]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSchema":
        return cls(d["mode"], [(n, k, list(c)) for n, k, c in d["entries"]])


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    name: str = "dataset"
    schema: FeatureSchema | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y).astype(np.int64)
        if self.X.ndim != 2:
            raise DataError("X must be a 2-D matrix")
        if self.X.shape[0] != self.Y.shape[0]:
            raise DataError("X and Y have different numbers of rows")
        if self.X.shape[0] < 2:
            raise DataError("need at least 2 instances")
        if self.X.shape[1] < 1:
            raise DataError("need at least 1 feature")
        if not np.all(np.isfinite(self.X)):
            raise DataError("X contains NaN or infinite values")
        if set(np.unique(self.Y)) != {0, 1}:
            raise DataError("Y must contain both classes 0 and 1 and nothing else")
        if not self.feature_names:
            self.feature_names = [f"x{k}" for k in range(self.X.shape[1])]

    @property
    def Q(self) -> int:
        return self.X.shape[0]

    @property
    def R(self) -> int:
        return self.X.shape[1]


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(
    path: str | os.PathLike,
    label_column: str = "label",
    column_kinds: Mapping[str, str] | None = None,
) -> RawTable:
    """Read a headered CSV into a :class:`RawTable`.

    A column is numeric when every cell parses as a float, unless
    ``column_kinds`` says otherwise. Labels map to 0/1 in ascending
    lexicographic order of the raw strings.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty table: {path}") from None
        header = [h.strip() for h in header]
        body = [row for row in reader if row]
    if not body:
        raise DataError(f"empty table: {path} has a header but no rows")
    if label_column not in header:
        raise DataError(f"missing label column {label_column!r} in {path}")
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(
                f"ragged rows: line {lineno} has {len(row)} cells, header has {len(header)}"
            )
    rows = [{h: cell.strip() for h, cell in zip(header, row)} for row in body]
    for lineno, r in enumerate(rows, start=2):
        for h, cell in r.items():
            if cell == "":
                raise DataError(f"missing cell: line {lineno}, column {h!r}")

    label_values = sorted({r[label_column] for r in rows})
    if len(label_values) != 2:
        raise DataError(
            f"non-binary label: column {label_column!r} has {len(label_values)} distinct values"
        )
    label_map = {v: k for k, v in enumerate(label_values)}

    kinds = dict(column_kinds or {})
    columns = []
    for h in header:
        if h == label_column:
            continue
        kind = kinds.get(h)
        if kind is None:
            kind = NUMERIC if all(_is_number(r[h]) for r in rows) else NOMINAL
        elif kind not in (NUMERIC, NOMINAL):
            raise DataError(f"unknown column kind {kind!r} for {h!r}")
        columns.append((h, kind))
    return RawTable(columns=columns, rows=rows, label_column=label_column, label_map=label_map)


def encode_nominal(raw: RawTable, mode: str = "onehot", name: str = "dataset") -> Dataset:
    """Turn a RawTable into a numeric Dataset.

    ``onehot`` expands a nominal column with V values into V indicator
    columns in sorted value order; ``drop`` discards nominal columns.
    """
    if mode not in ("onehot", "drop"):
        raise DataError(f"unknown nominal mode {mode!r}")
    entries = []
    for col, kind in raw.columns:
        if kind == NUMERIC:
            entries.append((col, NUMERIC, []))
        elif mode == "onehot":
            entries.append((col, NOMINAL, sorted({r[col] for r in raw.rows})))
    if not entries:
        raise DataError("no features remain after encoding")
    schema = FeatureSchema(mode, entries)
    X = schema.transform(raw)
    return Dataset(X, raw.labels, schema.feature_names, name=name, schema=schema)


def load_dataset(
    path: str | os.PathLike,
    label_column: str = "label",
    nominal: str = "onehot",
    column_kinds: Mapping[str, str] | None = None,
) -> Dataset:
    raw = load_csv(path, label_column, column_kinds)
    name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return encode_nominal(raw, nominal, name=name)


class ZScoreScaler(TransformerMixin, BaseEstimator):
    """Column-wise z-score with sample standard deviation (ddof=1).

    Columns whose training std is zero map to all zeros.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.means_ = X.mean(axis=0)
        if X.shape[0] > 1:
            self.stds_ = X.std(axis=0, ddof=1)
        else:
            self.stds_ = np.zeros(X.shape[1])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "means_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"dimension mismatch: expected {self.n_features_in_} columns, got {X.shape[1]}"
            )
        safe = np.where(self.stds_ > 0, self.stds_, 1.0)
        out = (X - self.means_) / safe
        out[:, self.stds_ == 0] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"means": self.means_.tolist(), "stds": self.stds_.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ZScoreScaler":
        sc = cls()
        sc.means_ = np.array(d["means"], dtype=float)
        sc.stds_ = np.array(d["stds"], dtype=float)
        sc.n_features_in_ = sc.means_.shape[0]
        return sc


def zscore_fit_apply(train_X, other_X):
    """Fit a scaler on ``train_X`` and apply it to both matrices."""
    train_X = np.asarray(train_X, dtype=float)
    other_X = np.asarray(other_X, dtype=float)
    if train_X.size == 0:
        raise DataError("train_X is empty")
    if other_X.ndim != 2 or other_X.shape[1] != train_X.shape[1]:
        raise DataError("dimension mismatch between train and other")
    scaler = ZScoreScaler().fit(train_X)
    return scaler, scaler.transform(train_X), scaler.transform(other_X)


@dataclass
class FoldAssignment:
    fold_of: np.ndarray
    k: int
    seed: int
    requested_k: int

    @property
    def reduced(self) -> bool:
        return self.k != self.requested_k

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, test


def round_robin_folds(Y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Shuffle each class, then deal instances to folds in turn.

    Dealing continues across classes so total fold sizes stay balanced;
    every fold is non-empty whenever ``k <= len(Y)``.
    """
    Y = np.asarray(Y)
    fold_of = np.empty(len(Y), dtype=np.int64)
    pos = 0
    for cls in np.unique(Y):
        idx = np.flatnonzero(Y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = (pos + np.arange(len(idx))) % k
        pos += len(idx)
    return fold_of


def stratified_folds(Y: Sequence[int], k: int = 10, seed: int = 0) -> FoldAssignment:
    """Stratified fold assignment; k shrinks to the smallest class size."""
    if k < 2:
        raise DataError("fold count k must be >= 2")
    Y = np.asarray(Y)
    _, counts = np.unique(Y, return_counts=True)
    k_eff = int(min(k, counts.min()))
    if k_eff < 2:
        raise DataError("cannot stratify: a class has fewer than 2 instances")
    rng = np.random.default_rng(seed)
    return FoldAssignment(round_robin_folds(Y, k_eff, rng), k_eff, seed, k)
