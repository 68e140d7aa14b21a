from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .schema import BINARY, BY_NAME, CONTINUOUS

# Columns of the labeled-cohort CSV that are not model features.
META_COLUMNS = ("id", "patient_id", "stay_index", "label", "trigger", "trigger_time",
                "baseline_creatinine", "peak_post_creatinine", "data_quality_flag")


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    kind: str = CONTINUOUS
    unit: str = ""

    @classmethod
    def for_name(cls, name):
        spec = BY_NAME.get(name)
        if spec is None:
            return cls(name)
        return cls(name, spec.kind, spec.unit)


@dataclass
class Dataset:
    """Feature matrix (NaN marks missing), 0/1 labels and per-column metadata."""

    X: np.ndarray
    y: np.ndarray
    features: list = field(default_factory=list)
    ids: list | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.X), -1)
        self.y = np.asarray(self.y).astype(np.int8)
        if not self.features:
            self.features = [FeatureMeta(f"x{j}") for j in range(self.X.shape[1])]
        self.features = [f if isinstance(f, FeatureMeta) else FeatureMeta.for_name(f)
                         for f in self.features]
        if len(self.features) != self.X.shape[1]:
            raise SchemaError("feature metadata length does not match column count")
        if len(self.y) != self.X.shape[0]:
            raise SchemaError("label count does not match row count", "label")
        if self.ids is not None and len(self.ids) != len(self.y):
            raise SchemaError("id count does not match row count", "id")
        for j, f in enumerate(self.features):
            if f.kind == BINARY:
                col = self.X[:, j]
                bad = ~np.isnan(col) & (col != 0) & (col != 1)
                if bad.any():
                    raise SchemaError(f"binary column {f.name!r} has non-0/1 values", f.name)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def names(self):
        return [f.name for f in self.features]

    @property
    def binary_mask(self):
        return np.array([f.kind == BINARY for f in self.features], dtype=bool)

    def column(self, name):
        try:
            return self.X[:, self.names.index(name)]
        except ValueError:
            raise SchemaError(f"no column named {name!r}", name) from None

    def subset(self, rows):
        rows = np.asarray(rows)
        ids = None if self.ids is None else [self.ids[i] for i in
                                             np.arange(self.n)[rows]]
        return Dataset(self.X[rows], self.y[rows], list(self.features), ids)

    def select(self, names):
        cols = []
        for name in names:
            if name not in self.names:
                raise SchemaError(f"no column named {name!r}", name)
            cols.append(self.names.index(name))
        return Dataset(self.X[:, cols], self.y.copy(), [self.features[j] for j in cols],
                       None if self.ids is None else list(self.ids))

    def replace(self, X=None, y=None, ids=...):
        return Dataset(self.X if X is None else X, self.y if y is None else y,
                       list(self.features), self.ids if ids is ... else ids)

    # ------------------------------------------------------------------ io

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", *self.names, "label"])
            for i in range(self.n):
                rid = self.ids[i] if self.ids is not None else str(i)
                w.writerow([rid, *(_cell(v) for v in self.X[i]), int(self.y[i])])

    @classmethod
    def from_csv(cls, path, features=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        if "label" not in header:
            raise SchemaError(f"{path}: missing column 'label'", "label")
        if features is None:
            features = [c for c in header if c not in META_COLUMNS]
        missing = [c for c in features if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}", missing[0])
        cols = [header.index(c) for c in features]
        X = np.array([[_parse(r[j]) for j in cols] for r in rows], dtype=float)
        X = X.reshape(len(rows), len(cols))
        y = np.array([int(r[header.index("label")]) for r in rows], dtype=np.int8)
        if "id" in header:
            ids = [r[header.index("id")] for r in rows]
        elif "patient_id" in header:
            ids = [f"{r[header.index('patient_id')]}/{r[header.index('stay_index')]}"
                   for r in rows]
        else:
            ids = None
        return cls(X, y, [FeatureMeta.for_name(c) for c in features], ids)


def _cell(v):
    return "" if np.isnan(v) else repr(float(v))


def _parse(s):
    return float("nan") if s == "" else float(s)


def from_cohort(cohort, names):
    """Dataset from labeled patients (``build_labeled_cohort`` output); None becomes NaN."""
    X = np.array([[np.nan if p.features.get(n) is None else p.features[n] for n in names]
                  for p in cohort], dtype=float).reshape(len(cohort), len(names))
    y = np.array([int(p.label.positive) for p in cohort], dtype=np.int8)
    ids = [f"{p.patient_id}/{p.stay_index}" for p in cohort]
    return Dataset(X, y, [FeatureMeta.for_name(n) for n in names], ids)
