"""Tree SHAP, accumulated local effects and leave-one-feature-out ablation.

SHAP values use path-dependent (cover-weighted) conditional expectations in
raw log-odds space. Along the path to one leaf, "feature j is known" turns the
cover ratios of all nodes testing j into the row's 0/1 branch indicators, so
each leaf defines a product game over its path features whose Shapley values
have a closed form via polynomial coefficients. Summing leaf games over all
leaves and trees gives the exact values.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InsufficientDataError, UnsupportedModelError
from .evaluation import auroc
from .models import TREE_FAMILIES, fit_model, predict_proba, predict_raw
from .schema import BINARY


@dataclass
class ShapExplanation:
    base_value: float
    phi: np.ndarray
    prediction: float


@dataclass
class AleCurve:
    feature: str
    edges: np.ndarray
    effects: np.ndarray  # centered accumulated effect at each edge
    counts: np.ndarray  # rows per bin (len(edges) - 1)


# ------------------------------------------------------------------ Tree SHAP

def _shapley_weights(m_max):
    W = np.zeros((m_max + 1, m_max + 1))
    for m in range(1, m_max + 1):
        for s in range(m):
            W[m, s] = math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m)
    return W


def _leaf_paths(ens):
    """Per-leaf path records for every tree of a FlatEnsemble."""
    leaf_val, leaf_ptr, slot_ptr = [], [0], [0]
    e_node, e_dir, e_slot, s_feat, s_cover = [], [], [], [], []
    base = 0.0
    for root in ens.roots:
        stack = [(int(root), [])]
        while stack:
            k, path = stack.pop()
            if ens.feature[k] < 0:
                slots, covers = [], []
                for node, right in path:
                    f = int(ens.feature[node])
                    child = ens.right[node] if right else ens.left[node]
                    c_par = ens.cover[node]
                    ratio = ens.cover[child] / c_par if c_par > 0 else 0.5
                    if f not in slots:
                        slots.append(f)
                        covers.append(1.0)
                    s = slots.index(f)
                    covers[s] *= ratio
                    e_node.append(node)
                    e_dir.append(int(right))
                    e_slot.append(s)
                v = float(ens.value[k])
                base += v * float(np.prod(covers)) if covers else v
                leaf_val.append(v)
                s_feat.extend(slots)
                s_cover.extend(covers)
                leaf_ptr.append(len(e_node))
                slot_ptr.append(len(s_feat))
                continue
            stack.append((int(ens.right[k]), path + [(k, True)]))
            stack.append((int(ens.left[k]), path + [(k, False)]))
    arr = lambda a, t: np.array(a, dtype=t)  # noqa: E731
    return (base, arr(leaf_val, float), arr(leaf_ptr, np.int64), arr(e_node, np.int64),
            arr(e_dir, np.int64), arr(e_slot, np.int64), arr(slot_ptr, np.int64),
            arr(s_feat, np.int64), arr(s_cover, float))


@njit(cache=True)
def _shap_kernel(X, feature, threshold, leaf_val, leaf_ptr, e_node, e_dir, e_slot,
                 slot_ptr, s_feat, s_cover, W):
    n, d = X.shape
    phi = np.zeros((n, d))
    n_leaves = leaf_val.shape[0]
    a = np.empty(64)
    poly = np.empty(65)
    for i in range(n):
        for lf in range(n_leaves):
            s0 = slot_ptr[lf]
            m = slot_ptr[lf + 1] - s0
            if m == 0:
                continue
            for s in range(m):
                a[s] = 1.0
            for e in range(leaf_ptr[lf], leaf_ptr[lf + 1]):
                node = e_node[e]
                right = not (X[i, feature[node]] <= threshold[node])
                if right != (e_dir[e] == 1):
                    a[e_slot[e]] = 0.0
            v = leaf_val[lf]
            for k in range(m):
                diff = a[k] - s_cover[s0 + k]
                if diff == 0.0:
                    continue
                poly[0] = 1.0
                deg = 0
                for j in range(m):
                    if j == k:
                        continue
                    c = s_cover[s0 + j]
                    poly[deg + 1] = poly[deg] * a[j]
                    for t in range(deg, 0, -1):
                        poly[t] = poly[t] * c + poly[t - 1] * a[j]
                    poly[0] = poly[0] * c
                    deg += 1
                acc = 0.0
                for s in range(deg + 1):
                    acc += poly[s] * W[m, s]
                phi[i, s_feat[s0 + k]] += v * diff * acc
    return phi


class _ShapCache:
    def __init__(self, model):
        ens = model.ensemble
        (self.base, *self.arrays) = _leaf_paths(ens)
        self.base += ens.base_score
        depth = int(np.diff(self.arrays[5]).max()) if len(self.arrays[5]) > 1 else 0
        if depth > 63:
            raise UnsupportedModelError("trees deeper than 63 distinct features per path")
        self.W = _shapley_weights(max(depth, 1))
        self.ens = ens


def _cache(model):
    if model.family not in TREE_FAMILIES:
        raise UnsupportedModelError(f"SHAP is implemented for tree ensembles, not "
                                    f"{model.family}")
    c = getattr(model, "_shap_cache", None)
    if c is None:
        c = model._shap_cache = _ShapCache(model)
    return c


def shap_values(model, X):
    """(base_value, phi) with phi of shape (n, d), raw log-odds space."""
    c = _cache(model)
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(getattr(X, "X", X), dtype=float)))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} columns, got {X.shape[1]}")
    leaf_val, leaf_ptr, e_node, e_dir, e_slot, slot_ptr, s_feat, s_cover = c.arrays
    phi = _shap_kernel(X, c.ens.feature, c.ens.threshold, leaf_val, leaf_ptr, e_node,
                       e_dir, e_slot, slot_ptr, s_feat, s_cover, c.W)
    return c.base, phi


def shap_tree(model, row):
    row = np.asarray(row, dtype=float).reshape(1, -1)
    base, phi = shap_values(model, row)
    return ShapExplanation(float(base), phi[0], float(predict_raw(model, row)[0]))


def shap_summary(model, dataset, max_rows=1000, seed=0):
    """Features ranked by mean |phi| (share of the total) and the phi matrix used.

    Returns (ranking, rows, phi): ranking is a list of dicts, rows the row
    indices explained.
    """
    rows = np.arange(dataset.n)
    if max_rows is not None and dataset.n > max_rows:
        rows = np.sort(np.random.default_rng(seed).choice(dataset.n, max_rows, replace=False))
    _, phi = shap_values(model, dataset.X[rows])
    mean_abs = np.abs(phi).mean(0)
    total = mean_abs.sum()
    order = sorted(range(dataset.d), key=lambda j: (-mean_abs[j], dataset.names[j]))
    ranking = [{"rank": r + 1, "feature": dataset.names[j], "mean_abs_shap": float(mean_abs[j]),
                "share": float(mean_abs[j] / total) if total > 0 else 0.0}
               for r, j in enumerate(order)]
    return ranking, rows, phi


# ------------------------------------------------------------------------ ALE

def ale_curve(model, dataset, feature, n_bins=32, scale="proba"):
    """First-order ALE with quantile bins, centered by the count-weighted mean of
    bin-midpoint effects. ``model`` is a TrainedModel or a callable X -> scores."""
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if dataset.n == 0:
        raise InsufficientDataError("ALE needs a nonempty dataset")
    j = dataset.names.index(feature)
    if dataset.features[j].kind == BINARY:
        raise ValueError(f"ALE is defined here for continuous features; {feature!r} is binary")
    if callable(model):
        f = model
    elif scale == "raw":
        f = lambda Z: predict_raw(model, Z)  # noqa: E731
    else:
        f = lambda Z: predict_proba(model, Z)  # noqa: E731
    x = dataset.X[:, j]
    edges = np.unique(np.quantile(x, np.linspace(0, 1, n_bins + 1), method="inverted_cdf"))
    if len(edges) < 2:
        raise InsufficientDataError(f"feature {feature!r} is constant")
    K = len(edges) - 1
    b = np.clip(np.searchsorted(edges, x, side="left") - 1, 0, K - 1)
    lo, hi = dataset.X.copy(), dataset.X.copy()
    lo[:, j], hi[:, j] = edges[b], edges[b + 1]
    diff = np.asarray(f(hi), dtype=float) - np.asarray(f(lo), dtype=float)
    counts = np.bincount(b, minlength=K)
    sums = np.bincount(b, diff, minlength=K)
    local = np.divide(sums, counts, out=np.zeros(K), where=counts > 0)
    acc = np.r_[0.0, np.cumsum(local)]
    mid = 0.5 * (acc[:-1] + acc[1:])
    acc -= (counts * mid).sum() / counts.sum()
    return AleCurve(feature, edges, acc, counts)


def ale_centered_mean(curve):
    mid = 0.5 * (curve.effects[:-1] + curve.effects[1:])
    return float((curve.counts * mid).sum() / curve.counts.sum())


# ------------------------------------------------------------------- ablation

ABLATION_MODEL = {"family": "logreg", "penalty": "l2", "lam": 1e-3}


def _delta_aucs(train, test, features, config):
    full = fit_model(config, train.select(features))
    auc_full = auroc(predict_proba(full, test.select(features).X), test.y)
    out = []
    for f in features:
        keep = [g for g in features if g != f]
        m = fit_model(config, train.select(keep))
        out.append(auc_full - auroc(predict_proba(m, test.select(keep).X), test.y))
    return auc_full, np.array(out)


def ablation(train, test, feature_list, n_boot=20, seed=0, config=None, workers=1):
    """Delta AUROC per feature when an L2 logistic regression is retrained without it.

    Spread comes from refitting on ``n_boot`` bootstrap resamples of ``train``.
    """
    if len(feature_list) < 2:
        raise ValueError("ablation needs at least 2 features")
    config = config or ABLATION_MODEL
    auc_full, delta = _delta_aucs(train, test, feature_list, config)
    streams = np.random.SeedSequence(seed).spawn(n_boot)

    def boot(k):
        rng = np.random.default_rng(streams[k])
        rows = rng.integers(0, train.n, train.n)
        return _delta_aucs(train.subset(rows), test, feature_list, config)[1]

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            reps = list(ex.map(boot, range(n_boot)))
    else:
        reps = [boot(k) for k in range(n_boot)]
    reps = np.array(reps).reshape(n_boot, len(feature_list))
    rows = []
    for i, f in enumerate(feature_list):
        r = reps[:, i]
        rows.append({"feature": f, "auc_full": float(auc_full),
                     "auc_without": float(auc_full - delta[i]), "delta_auc": float(delta[i]),
                     "boot_mean": float(r.mean()) if n_boot else None,
                     "boot_sd": float(r.std(ddof=1)) if n_boot > 1 else None,
                     "boot_low": float(np.percentile(r, 2.5)) if n_boot else None,
                     "boot_high": float(np.percentile(r, 97.5)) if n_boot else None})
    order = sorted(range(len(rows)), key=lambda i: (-rows[i]["delta_auc"], rows[i]["feature"]))
    for r, i in enumerate(order, 1):
        rows[i]["rank"] = r
    return [rows[i] for i in order]
