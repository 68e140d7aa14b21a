"""Histogram gradient-boosted trees with three growth policies.

``levelwise`` grows depth-wise to ``max_depth``. ``leafwise`` grows best-first
under a ``max_leaves`` budget. ``ordered`` picks each tree's structure from
gradients of a shadow score in which every row's value only depends on rows
ahead of it in a fixed random permutation; leaf values of the returned model
are Newton steps on the ordinary gradients.

Every leaf value is halved until the leaf's own logloss does not increase, so
the training loss trace is nonincreasing by construction.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ..errors import ConfigError, InsufficientDataError
from ._kernels import MAX_BINS, apply_flat, best_split, predict_flat

VARIANTS = ("ordered", "leafwise", "levelwise")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logloss_terms(z, y):
    """Per-row logistic loss of raw scores ``z``, stable for large |z|."""
    z = np.asarray(z, dtype=float)
    return np.logaddexp(0.0, z) - y * z


def make_cuts(col, max_bins=MAX_BINS):
    """Candidate thresholds for one column; a split sends x <= cut left."""
    u = np.unique(col)
    if len(u) <= max_bins:
        return (u[:-1] + u[1:]) / 2.0
    q = np.quantile(col, np.arange(1, max_bins) / max_bins, method="inverted_cdf")
    q = np.unique(q)
    return q[q < u[-1]]


def bin_columns(X, cuts):
    bins = np.empty(X.shape, dtype=np.int64)
    for j, c in enumerate(cuts):
        bins[:, j] = np.searchsorted(c, X[:, j], side="left")
    return bins


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.cover = [], []

    def add(self, cover):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.cover.append(float(cover))
        return len(self.feature) - 1

    def arrays(self):
        return {"feature": np.array(self.feature, dtype=np.int64),
                "threshold": np.array(self.threshold, dtype=float),
                "left": np.array(self.left, dtype=np.int64),
                "right": np.array(self.right, dtype=np.int64),
                "value": np.array(self.value, dtype=float),
                "cover": np.array(self.cover, dtype=float)}


def _grow(bins, n_bins, cuts, g, h, policy, cfg):
    """Tree structure for gradients (g, h); returns (builder, node index per row)."""
    n = len(g)
    tb = _Builder()
    root = tb.add(n)
    node_of = np.zeros(n, dtype=np.int64)
    rows_of = {root: np.arange(n, dtype=np.int64)}
    depth = {root: 0}
    lam, min_leaf = cfg["l2_reg"], cfg["min_samples_leaf"]

    def candidate(node):
        rows = rows_of[node]
        if depth[node] >= cfg["max_depth"] or len(rows) < 2 * min_leaf:
            return None
        gain, f, b, _, _ = best_split(bins, n_bins, rows, g, h, lam, min_leaf,
                                      cfg["min_child_hess"])
        if f < 0 or gain < cfg["min_split_gain"]:
            return None
        return gain, f, b

    def split(node, f, b):
        rows = rows_of.pop(node)
        go_left = bins[rows, f] <= b
        lr, rr = rows[go_left], rows[~go_left]
        lo, hi = tb.add(len(lr)), tb.add(len(rr))
        tb.feature[node], tb.threshold[node] = int(f), float(cuts[f][b])
        tb.left[node], tb.right[node] = lo, hi
        node_of[lr], node_of[rr] = lo, hi
        rows_of[lo], rows_of[hi] = lr, rr
        depth[lo] = depth[hi] = depth[node] + 1
        return lo, hi

    if policy == "leafwise":
        heap, n_leaves = [], 1
        c = candidate(root)
        if c:
            heapq.heappush(heap, (-c[0], root, c[1], c[2]))
        while heap and n_leaves < cfg["max_leaves"]:
            _, node, f, b = heapq.heappop(heap)
            for child in split(node, f, b):
                c = candidate(child)
                if c:
                    heapq.heappush(heap, (-c[0], child, c[1], c[2]))
            n_leaves += 1
    else:
        frontier = [root]
        while frontier:
            nxt = []
            for node in frontier:
                c = candidate(node)
                if c:
                    nxt.extend(split(node, c[1], c[2]))
            frontier = nxt
    return tb, node_of


def _leaf_values(tb, node_of, F, y, g, h, cfg):
    """Newton leaf values scaled by the learning rate, halved per leaf until the
    leaf's loss does not rise. Returns the per-node value array."""
    m = len(tb.feature)
    G = np.bincount(node_of, g, minlength=m)
    H = np.bincount(node_of, h, minlength=m)
    denom = H + cfg["l2_reg"]
    v = np.where(denom > 0, -G / np.where(denom > 0, denom, 1.0), 0.0) * cfg["learning_rate"]
    v[np.asarray(tb.feature) >= 0] = 0.0
    if cfg["learning_rate"] == 0:
        return v
    old = logloss_terms(F, y)
    for _ in range(60):
        diff = np.bincount(node_of, logloss_terms(F + v[node_of], y) - old, minlength=m)
        bad = diff > 0
        if not bad.any():
            break
        v[bad] *= 0.5
    else:
        v[bad] = 0.0
    return v


def _ordered_shift(node_of, rank, g, h, lam, lr):
    """Per-row leaf value estimated only from rows earlier in the permutation."""
    idx = np.lexsort((rank, node_of))
    leaf = node_of[idx]
    cg, ch = np.cumsum(g[idx]), np.cumsum(h[idx])
    start = np.r_[True, leaf[1:] != leaf[:-1]]
    first = np.maximum.accumulate(np.where(start, np.arange(len(idx)), 0))
    base_g = np.where(first > 0, cg[first - 1], 0.0)
    base_h = np.where(first > 0, ch[first - 1], 0.0)
    pg = cg - g[idx] - base_g  # exclusive prefix within the leaf
    ph = ch - h[idx] - base_h
    denom = ph + lam
    shift = np.zeros(len(idx))
    ok = denom > 0
    shift[ok] = -lr * pg[ok] / denom[ok]
    out = np.empty(len(idx))
    out[idx] = shift
    return out


DEFAULTS = {"variant": "ordered", "n_rounds": 200, "learning_rate": 0.1, "max_depth": 4,
            "max_leaves": 31, "l2_reg": 1.0, "min_samples_leaf": 1, "min_child_hess": 1e-6,
            "min_split_gain": 0.0, "max_bins": MAX_BINS}


def check_config(cfg):
    if cfg["variant"] not in VARIANTS:
        raise ConfigError(f"unknown GBDT variant {cfg['variant']!r}")
    if int(cfg["n_rounds"]) != cfg["n_rounds"] or cfg["n_rounds"] < 1:
        raise ConfigError("n_rounds must be a positive integer")
    if not cfg["learning_rate"] >= 0:
        raise ConfigError("learning_rate must be >= 0")
    if cfg["max_depth"] < 1 or cfg["max_leaves"] < 2:
        raise ConfigError("max_depth must be >= 1 and max_leaves >= 2")
    if cfg["l2_reg"] < 0 or cfg["min_samples_leaf"] < 1:
        raise ConfigError("l2_reg must be >= 0 and min_samples_leaf >= 1")
    if not 2 <= cfg["max_bins"] <= MAX_BINS:
        raise ConfigError(f"max_bins must lie in [2, {MAX_BINS}]")


def train_gbdt(X, y, seed=0, **kw):
    """Fit a boosted ensemble; returns (params, loss_trace)."""
    cfg = {**DEFAULTS, **kw}
    check_config(cfg)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.isnan(X).any():
        raise ValueError("GBDT training requires complete data")
    if y.min() == y.max():
        raise InsufficientDataError("GBDT training needs both classes")
    n = len(y)
    cuts = [make_cuts(X[:, j], cfg["max_bins"]) for j in range(X.shape[1])]
    n_bins = np.array([len(c) + 1 for c in cuts], dtype=np.int64)
    bins = bin_columns(X, cuts)
    rate = y.mean()
    base = math.log(rate / (1 - rate))
    F = np.full(n, base)
    ordered = cfg["variant"] == "ordered"
    policy = "leafwise" if cfg["variant"] == "leafwise" else "levelwise"
    if ordered:
        rank = np.random.default_rng(seed).permutation(n)
        F_ord = F.copy()

    trees, trace = [], []
    loss = float(logloss_terms(F, y).mean())
    for _ in range(int(cfg["n_rounds"])):
        p = sigmoid(F)
        g, h = p - y, p * (1 - p)
        if ordered:
            po = sigmoid(F_ord)
            tb, node_of = _grow(bins, n_bins, cuts, po - y, po * (1 - po), policy, cfg)
        else:
            tb, node_of = _grow(bins, n_bins, cuts, g, h, policy, cfg)
        v = _leaf_values(tb, node_of, F, y, g, h, cfg)
        F_new = F + v[node_of]
        new_loss = float(logloss_terms(F_new, y).mean())
        if new_loss > loss:  # summation rounding; keep the structure, drop the step
            v[:] = 0.0
        else:
            F, loss = F_new, new_loss
        tb.value = list(v)
        trees.append(tb.arrays())
        trace.append(loss)
        if ordered:
            F_ord = F_ord + _ordered_shift(node_of, rank, g=po - y, h=po * (1 - po),
                                           lam=cfg["l2_reg"], lr=cfg["learning_rate"])
    return {"base_score": base, "trees": trees}, trace


# ----------------------------------------------------------- ensemble views

class FlatEnsemble:
    """All trees concatenated into flat arrays for the prediction kernel."""

    def __init__(self, base_score, trees):
        self.base_score = float(base_score)
        self.trees = trees
        off, roots, parts = 0, [], {k: [] for k in ("feature", "threshold", "left",
                                                    "right", "value", "cover")}
        for t in trees:
            roots.append(off)
            for k in parts:
                a = np.asarray(t[k])
                if k in ("left", "right"):
                    a = np.where(a >= 0, a + off, -1)
                parts[k].append(a)
            off += len(t["feature"])
        cat = {k: (np.concatenate(v) if v else np.empty(0)) for k, v in parts.items()}
        self.feature = cat["feature"].astype(np.int64)
        self.threshold = cat["threshold"].astype(float)
        self.left = cat["left"].astype(np.int64)
        self.right = cat["right"].astype(np.int64)
        self.value = cat["value"].astype(float)
        self.cover = cat["cover"].astype(float)
        self.roots = np.array(roots, dtype=np.int64)

    def raw(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        if len(self.roots) == 0:
            return np.full(len(X), self.base_score)
        return self.base_score + predict_flat(X, self.feature, self.threshold, self.left,
                                              self.right, self.value, self.roots)

    def leaves(self, X, t):
        r = self.roots[t]
        return apply_flat(np.ascontiguousarray(X, dtype=float), self.feature,
                          self.threshold, self.left, self.right, r) - r


def tree_to_nested(t, k=0):
    if t["feature"][k] < 0:
        return {"value": float(t["value"][k]), "cover": float(t["cover"][k])}
    return {"feature": int(t["feature"][k]), "threshold": float(t["threshold"][k]),
            "cover": float(t["cover"][k]),
            "left": tree_to_nested(t, t["left"][k]),
            "right": tree_to_nested(t, t["right"][k])}


def tree_from_nested(node):
    """Flat arrays from nested node records (preorder numbering)."""
    tb = _Builder()

    def visit(nd):
        k = tb.add(nd.get("cover", 0.0))
        if "value" in nd and "feature" not in nd:
            tb.value[k] = float(nd["value"])
            return k
        tb.feature[k], tb.threshold[k] = int(nd["feature"]), float(nd["threshold"])
        tb.left[k] = visit(nd["left"])
        tb.right[k] = visit(nd["right"])
        return k

    visit(node)
    return tb.arrays()
