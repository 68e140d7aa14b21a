"""Gaussian naive Bayes with an additive variance floor."""

import numpy as np

from ..errors import InsufficientDataError

VAR_FLOOR = 1e-9


def train_gnb(X, y, var_floor=VAR_FLOOR):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(bool)
    if np.isnan(X).any():
        raise ValueError("Gaussian NB requires complete data")
    if y.all() or not y.any():
        raise InsufficientDataError("Gaussian NB needs rows from both classes")
    params = {"prior": [], "mean": [], "var": []}
    for c in (~y, y):
        params["prior"].append(float(c.mean()))
        params["mean"].append(X[c].mean(0))
        params["var"].append(X[c].var(0) + var_floor)
    params = {k: np.asarray(v) for k, v in params.items()}
    return params, []


def raw(params, X):
    """Posterior log-odds log P(1|x) - log P(0|x)."""
    X = np.asarray(X, dtype=float)
    ll = []
    for c in (0, 1):
        m, v = params["mean"][c], params["var"][c]
        ll.append(np.log(params["prior"][c])
                  - 0.5 * (np.log(2 * np.pi * v) + (X - m) ** 2 / v).sum(1))
    return ll[1] - ll[0]
