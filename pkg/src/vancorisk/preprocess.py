"""Train-fitted imputation and min-max scaling, stratified splits, SMOTE."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import InsufficientDataError, SchemaError
from .schema import BINARY


def _stratified_alloc(n_class, fraction):
    return int(np.floor(n_class * fraction + 0.5))


def stratified_split(data, test_fraction, seed):
    """Partition rows into (train, test) preserving class prevalence.

    Each class contributes round(n_c * test_fraction) rows to the test side,
    chosen by a seeded shuffle.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    classes = np.unique(data.y)
    if len(classes) < 2:
        raise InsufficientDataError("stratified split needs both classes present")
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in (0, 1):
        idx = np.flatnonzero(data.y == c)
        idx = idx[rng.permutation(len(idx))]
        test_idx.append(idx[:_stratified_alloc(len(idx), test_fraction)])
    test_mask = np.zeros(data.n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    return data.subset(np.flatnonzero(~test_mask)), data.subset(np.flatnonzero(test_mask))


def stratified_folds(y, n_folds, seed):
    """Fold index per row; each class is dealt round-robin after a seeded shuffle."""
    y = np.asarray(y)
    for c in (0, 1):
        if (y == c).sum() < n_folds:
            raise InsufficientDataError(
                f"class {c} has {(y == c).sum()} rows, fewer than {n_folds} folds")
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % n_folds
        offset += len(idx)
    return fold


@dataclass
class PreprocessParams:
    names: list
    kinds: list
    median: list = field(default_factory=list)  # continuous: median; binary: mode
    minimum: list = field(default_factory=list)
    maximum: list = field(default_factory=list)
    fitted: bool = True

    def to_dict(self):
        return {"schema_version": 1, "names": list(self.names), "kinds": list(self.kinds),
                "median": [float(v) for v in self.median],
                "minimum": [float(v) for v in self.minimum],
                "maximum": [float(v) for v in self.maximum]}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["names"]), list(d["kinds"]), list(d["median"]),
                   list(d["minimum"]), list(d["maximum"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def restrict(self, names):
        idx = [self.names.index(n) for n in names]
        return PreprocessParams([self.names[i] for i in idx], [self.kinds[i] for i in idx],
                                [self.median[i] for i in idx],
                                [self.minimum[i] for i in idx],
                                [self.maximum[i] for i in idx])

    def inverse_scale(self, name, values):
        j = self.names.index(name)
        values = np.asarray(values, dtype=float)
        if self.kinds[j] == BINARY:
            return values
        lo, hi = self.minimum[j], self.maximum[j]
        return values * (hi - lo) + lo


def fit_params(train):
    """Medians (continuous) / modes (binary) and min/max, ignoring missing values."""
    med, lo, hi = [], [], []
    for j, f in enumerate(train.features):
        col = train.X[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            raise SchemaError(f"column {f.name!r} has no observed training values", f.name)
        if f.kind == BINARY:
            ones = int((col == 1).sum())
            med.append(1.0 if ones > col.size - ones else 0.0)
        else:
            med.append(float(np.median(col)))
        lo.append(float(col.min()))
        hi.append(float(col.max()))
    return PreprocessParams(train.names, [f.kind for f in train.features], med, lo, hi)


def transform(data, params):
    """Impute then min-max scale continuous columns; binary columns pass through.

    Values outside the training range are not clipped. A column that was
    constant in training maps to 0.0.
    """
    if not params.fitted:
        raise ValueError("preprocessing parameters are not fitted")
    if data.names != list(params.names):
        bad = next((n for n in data.names if n not in params.names), None)
        raise SchemaError(f"columns do not match fitted parameters (first: {bad!r})", bad)
    X = data.X.copy()
    for j, kind in enumerate(params.kinds):
        col = X[:, j]
        col[np.isnan(col)] = params.median[j]
        if kind == BINARY:
            continue
        lo, hi = params.minimum[j], params.maximum[j]
        if hi == lo:
            warnings.warn(f"column {params.names[j]!r} is constant in training; set to 0.0",
                          stacklevel=2)
            col[:] = 0.0
        else:
            col[:] = (col - lo) / (hi - lo)
    return data.replace(X=X)


@dataclass
class SmoteInfo:
    base: np.ndarray  # row index (into the input) of each synthetic row's origin
    neighbor: np.ndarray
    delta: np.ndarray
    raw: np.ndarray  # synthetic rows before binary rounding


def _knn(points, k):
    """Indices of the k nearest other points (Euclidean), ties by index."""
    n = len(points)
    sq = (points ** 2).sum(1)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, 1024):
        block = points[start:start + 1024]
        d2 = sq[start:start + 1024, None] + sq[None, :] - 2.0 * block @ points.T
        d2[np.arange(len(block)), np.arange(start, start + len(block))] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out[start:start + len(block)] = order
    return out


def smote(train, k=5, target_ratio=1.0, seed=0, return_info=False):
    """Append synthetic minority rows x + delta * (neighbor - x), delta ~ U(0, 1).

    Neighbors are drawn uniformly from each origin's k nearest minority rows.
    Rows are added until minority/majority reaches ``target_ratio``; binary
    columns of synthetic rows are rounded to {0, 1}.
    """
    if np.isnan(train.X).any():
        raise ValueError("SMOTE requires imputed data (no missing values)")
    counts = np.bincount(train.y, minlength=2)
    minority = int(np.argmin(counts))
    min_idx = np.flatnonzero(train.y == minority)
    if len(min_idx) < k + 1:
        raise InsufficientDataError(
            f"SMOTE needs at least k+1={k + 1} minority rows, found {len(min_idx)}")
    n_new = int(np.floor(target_ratio * counts[1 - minority] + 0.5)) - len(min_idx)
    rng = np.random.default_rng(seed)
    pts = train.X[min_idx]
    if n_new <= 0:
        out = train.replace()
        empty = np.empty(0, dtype=np.int64)
        info = SmoteInfo(empty, empty, np.empty(0), np.empty((0, train.d)))
        return (out, info) if return_info else out

    nn = _knn(pts, k)
    base = rng.integers(0, len(min_idx), n_new)
    neigh = nn[base, rng.integers(0, k, n_new)]
    delta = rng.random(n_new)
    raw = pts[base] + delta[:, None] * (pts[neigh] - pts[base])
    synth = raw.copy()
    bmask = train.binary_mask
    synth[:, bmask] = np.rint(synth[:, bmask])

    ids = None
    if train.ids is not None:
        ids = list(train.ids) + [f"smote{i}" for i in range(n_new)]
    out = Dataset(np.vstack([train.X, synth]),
                  np.concatenate([train.y, np.full(n_new, minority, dtype=np.int8)]),
                  list(train.features), ids)
    if return_info:
        return out, SmoteInfo(min_idx[base], min_idx[neigh], delta, raw)
    return out


def scale_array(X, params):
    """Min-max scale raw rows (no imputation) with fitted params, as ``transform`` does."""
    X = np.array(X, dtype=float, copy=True)
    for j, kind in enumerate(params.kinds):
        if kind == BINARY:
            continue
        lo, hi = params.minimum[j], params.maximum[j]
        X[:, j] = 0.0 if hi == lo else (X[:, j] - lo) / (hi - lo)
    return X
