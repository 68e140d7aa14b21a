"""One-hidden-layer ReLU network with a sigmoid output, trained by Adam on BCE.

With ``hidden_units=0`` the input connects straight to the output unit and the
network is a logistic regression.
"""

import numpy as np

from ..errors import ConfigError, TrainingDivergedError
from .gbdt import logloss_terms, sigmoid
from .logreg import rowdot

DEFAULTS = {"hidden_units": 32, "dropout": 0.1, "learning_rate": 0.01, "batch_size": 128,
            "epochs": 60, "l2": 0.0}


class Adam:
    def __init__(self, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = self.v = None

    def step(self, params, grads):
        """Update the list of arrays ``params`` in place."""
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1, c2 = 1 - self.beta1 ** self.t, 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def init_params(d, hidden, rng):
    if hidden == 0:
        return {"W2": np.zeros(d), "b2": np.zeros(1)}
    return {"W1": rng.normal(0, np.sqrt(2.0 / d), (d, hidden)), "b1": np.zeros(hidden),
            "W2": rng.normal(0, np.sqrt(1.0 / hidden), hidden), "b2": np.zeros(1)}


def raw(params, X):
    """Output log-odds; row-independent arithmetic so batches match single rows."""
    X = np.asarray(X, dtype=float)
    if "W1" not in params:
        return rowdot(X, params["W2"]) + params["b2"][0]
    a = np.maximum(rowdot(X[:, :, None].swapaxes(1, 2), params["W1"].T) + params["b1"], 0.0)
    return rowdot(a, params["W2"]) + params["b2"][0]


def loss_and_grad(params, X, y, mask=None, l2=0.0):
    """Mean BCE (+ l2/2 on weights) and its gradient dict; ``mask`` is the scaled
    dropout mask on hidden units."""
    n = len(y)
    if "W1" not in params:
        z = X @ params["W2"] + params["b2"][0]
        r = (sigmoid(z) - y) / n
        L = logloss_terms(z, y).mean() + 0.5 * l2 * (params["W2"] @ params["W2"])
        return L, {"W2": X.T @ r + l2 * params["W2"], "b2": np.array([r.sum()])}
    pre = X @ params["W1"] + params["b1"]
    a = np.maximum(pre, 0.0)
    if mask is not None:
        a = a * mask
    z = a @ params["W2"] + params["b2"][0]
    r = (sigmoid(z) - y) / n
    L = logloss_terms(z, y).mean() + 0.5 * l2 * ((params["W1"] ** 2).sum()
                                                  + params["W2"] @ params["W2"])
    da = np.outer(r, params["W2"])
    if mask is not None:
        da = da * mask
    dpre = da * (pre > 0)
    return L, {"W1": X.T @ dpre + l2 * params["W1"], "b1": dpre.sum(0),
               "W2": a.T @ r + l2 * params["W2"], "b2": np.array([r.sum()])}


def train_mlp(X, y, seed=0, hidden_units=32, dropout=0.1, learning_rate=0.01,
              batch_size=128, epochs=60, l2=0.0):
    if hidden_units < 0 or not 0 <= dropout < 1 or batch_size < 1 or epochs < 1:
        raise ConfigError("invalid MLP hyperparameters")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.isnan(X).any():
        raise ValueError("MLP training requires complete data")
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[1], hidden_units, rng)
    keys = list(params)
    opt = Adam(lr=learning_rate)
    n, trace = len(y), []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = order[s:s + batch_size]
            mask = None
            if hidden_units and dropout > 0:
                mask = (rng.random((len(idx), hidden_units)) >= dropout) / (1 - dropout)
            _, g = loss_and_grad(params, X[idx], y[idx], mask, l2)
            opt.step([params[k] for k in keys], [g[k] for k in keys])
        L = float(logloss_terms(raw(params, X), y).mean())
        if not np.isfinite(L):
            raise TrainingDivergedError(f"MLP loss became {L} at epoch {epoch}")
        trace.append(L)
    return params, trace
