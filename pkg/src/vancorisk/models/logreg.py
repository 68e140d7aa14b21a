"""Penalized logistic regression: mean BCE + lambda * penalty (intercept unpenalized)."""

import warnings

import numpy as np
from scipy.optimize import minimize

from ..errors import ConfigError
from .gbdt import logloss_terms, sigmoid

DEFAULTS = {"penalty": "l2", "lam": 1e-3, "max_iter": 5000, "tol": 1e-8}


def loss(w, b, X, y, lam=0.0, penalty="l2"):
    z = X @ w + b
    pen = 0.5 * lam * (w @ w) if penalty == "l2" else lam * np.abs(w).sum()
    return float(logloss_terms(z, y).mean() + pen)


def grad(w, b, X, y, lam=0.0, penalty="l2"):
    """Gradient of ``loss`` w.r.t. (w, b); for l1 this is the smooth part only."""
    r = sigmoid(X @ w + b) - y
    gw = X.T @ r / len(y)
    if penalty == "l2":
        gw = gw + lam * w
    return gw, float(r.mean())


def _fit_l2(X, y, lam, max_iter, tol):
    d = X.shape[1]

    def f(theta):
        w, b = theta[:d], theta[d]
        gw, gb = grad(w, b, X, y, lam)
        return loss(w, b, X, y, lam), np.r_[gw, gb]

    rate = y.mean()
    x0 = np.r_[np.zeros(d), np.log(rate / (1 - rate))]
    res = minimize(f, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-15})
    gnorm = float(np.linalg.norm(f(res.x)[1]))
    if not res.success and gnorm > 1e-5:
        warnings.warn(f"logistic regression did not converge (gradient norm {gnorm:.3g})",
                      stacklevel=3)
    return res.x[:d], float(res.x[d]), res.nit


def _fit_l1(X, y, lam, max_iter, tol):
    """FISTA with backtracking and adaptive restart on the smooth BCE part,
    soft-thresholding for w."""
    n, d = X.shape
    rate = y.mean()
    w, b = np.zeros(d), float(np.log(rate / (1 - rate)))
    zw, zb, t = w.copy(), b, 1.0
    step = 1.0 / (0.25 * (np.linalg.norm(X, 2) ** 2 / n + 1.0))
    it = 0
    for it in range(1, max_iter + 1):
        f0 = loss(zw, zb, X, y)
        gw, gb = grad(zw, zb, X, y, penalty="l1")
        while True:
            nw = zw - step * gw
            nw = np.sign(nw) * np.maximum(np.abs(nw) - step * lam, 0.0)
            nb = zb - step * gb
            dw, db = nw - zw, nb - zb
            if loss(nw, nb, X, y) <= f0 + gw @ dw + gb * db + (dw @ dw + db * db) / (2 * step):
                break
            step *= 0.5
        change = np.sqrt(((nw - w) ** 2).sum() + (nb - b) ** 2)
        if dw @ (nw - w) + db * (nb - b) < 0:  # gradient-based adaptive restart
            t = 1.0
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        mom = (t - 1) / t_next
        zw, zb = nw + mom * (nw - w), nb + mom * (nb - b)
        w, b, t = nw, nb, t_next
        if change < tol:
            return w, b, it
    gw, gb = grad(w, b, X, y, penalty="l1")
    # minimum-norm subgradient: zero weights may absorb up to lam of the gradient
    sub = np.where(w != 0, gw + lam * np.sign(w), np.sign(gw) * np.maximum(np.abs(gw) - lam, 0))
    warnings.warn(f"L1 logistic regression stopped at max_iter (subgradient norm "
                  f"{np.hypot(np.linalg.norm(sub), gb):.3g})", stacklevel=3)
    return w, b, it


def train_logreg(X, y, penalty="l2", lam=1e-3, max_iter=5000, tol=1e-8):
    if penalty not in ("l1", "l2"):
        raise ConfigError(f"penalty must be 'l1' or 'l2', got {penalty!r}")
    if lam < 0:
        raise ConfigError("lam must be >= 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.isnan(X).any():
        raise ValueError("logistic regression requires complete data")
    fit = _fit_l2 if penalty == "l2" else _fit_l1
    w, b, n_iter = fit(X, y, lam, max_iter, tol)
    return {"weights": w, "intercept": b, "n_iter": int(n_iter)}, \
        [loss(w, b, X, y, lam, penalty)]


def rowdot(X, w):
    """X @ w with each row reduced on its own, so a batch equals its rows one at a time
    (BLAS may sum a matrix product in a different order than a single row)."""
    return (np.asarray(X, dtype=float) * w).sum(-1)


def raw(params, X):
    return rowdot(X, np.asarray(params["weights"])) + params["intercept"]
