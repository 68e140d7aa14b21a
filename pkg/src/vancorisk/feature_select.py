"""Two-stage feature selection: ANOVA F filter, then random-forest Gini importance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .schema import ADMISSION_FEATURES, table_order
from .stats import f_upper_p


@dataclass
class FeatureScore:
    name: str
    f_statistic: float
    p_value: float
    gini_importance: float | None = None
    rank: int | None = None
    selected: bool = False


def anova_f_scores(data):
    """One-way ANOVA F (two groups) per column; zero within-group variance gives +inf, p=0."""
    X, y = data.X, data.y.astype(bool)
    if np.isnan(X).any():
        raise ValueError("ANOVA F-scores require complete data")
    n1, n0 = int(y.sum()), int((~y).sum())
    if n1 < 2 or n0 < 2:
        raise InsufficientDataError("each class needs at least 2 rows")
    N, k = n0 + n1, 2
    grand = X.mean(0)
    m1, m0 = X[y].mean(0), X[~y].mean(0)
    ss_between = n1 * (m1 - grand) ** 2 + n0 * (m0 - grand) ** 2
    ss_within = ((X[y] - m1) ** 2).sum(0) + ((X[~y] - m0) ** 2).sum(0)
    out = []
    for j, name in enumerate(data.names):
        msb = ss_between[j] / (k - 1)
        msw = ss_within[j] / (N - k)
        if msw == 0:
            f, p = (math.inf, 0.0) if msb > 0 else (0.0, 1.0)
        else:
            f = float(msb / msw)
            p = f_upper_p(f, k - 1, N - k)
        out.append(FeatureScore(name, f, p))
    return out


def select_top_k(scores, k):
    """Names of the k largest F statistics; ties go to the lexicographically smaller name."""
    if k > len(scores):
        raise ValueError(f"k={k} exceeds the {len(scores)} scored features")
    ranked = sorted(scores, key=lambda s: (-s.f_statistic, s.name))
    return [s.name for s in ranked[:k]]


# ------------------------------------------------------------- random forest

def _gini(pos, tot):
    p = pos / tot
    return 2.0 * p * (1.0 - p)


def _best_split(x, y):
    """Best Gini split of one feature at a node: (decrease * n_node, threshold) or None."""
    order = np.argsort(x, kind="mergesort")
    xs, ys = x[order], y[order]
    n = len(xs)
    valid = np.flatnonzero(xs[1:] != xs[:-1])  # split after position i
    if valid.size == 0:
        return None
    cum = np.cumsum(ys)
    n_l = valid + 1.0
    pos_l = cum[valid]
    pos_r = cum[-1] - pos_l
    n_r = n - n_l
    child = n_l * _gini(pos_l, n_l) + n_r * _gini(pos_r, n_r)
    best = int(np.argmin(child))
    parent = n * _gini(cum[-1], n)
    gain = parent - child[best]
    i = valid[best]
    return gain, 0.5 * (xs[i] + xs[i + 1])


def _grow_tree(X, y, max_depth, max_features, rng, importance):
    """Grow one CART tree on (X, y), accumulating n_node * impurity decrease per feature."""
    n_total = len(y)
    stack = [(np.arange(n_total), 0)]
    n_nodes = 0
    while stack:
        idx, depth = stack.pop()
        n_nodes += 1
        yi = y[idx]
        pos = yi.sum()
        if depth >= max_depth or pos == 0 or pos == len(idx) or len(idx) < 2:
            continue
        feats = rng.choice(X.shape[1], max_features, replace=False)
        best = None
        for j in feats:
            res = _best_split(X[idx, j], yi)
            if res is not None and res[0] > 1e-12 and (best is None or res[0] > best[0]):
                best = (res[0], j, res[1])
        if best is None:
            continue
        gain, j, thr = best
        importance[j] += gain / n_total  # p(v) * delta_I(v)
        go_left = X[idx, j] <= thr
        stack.append((idx[~go_left], depth + 1))
        stack.append((idx[go_left], depth + 1))
    return n_nodes


def rf_importance(data, n_trees=200, max_depth=8, seed=0, max_features="sqrt",
                  bootstrap=True):
    """Mean decrease in Gini impurity per feature over a bagged forest, summing to 1."""
    X, y = data.X, data.y.astype(np.int64)
    if np.isnan(X).any():
        raise ValueError("random forest importance requires complete data")
    if len(np.unique(y)) < 2:
        raise InsufficientDataError("random forest importance needs two classes")
    if (X == X[0]).all():
        raise InsufficientDataError("all rows are identical")
    d = X.shape[1]
    mf = max(1, int(math.sqrt(d))) if max_features == "sqrt" else int(max_features or d)
    mf = min(mf, d)
    rng = np.random.default_rng(seed)
    total = np.zeros(d)
    for _ in range(n_trees):
        rows = rng.integers(0, len(y), len(y)) if bootstrap else np.arange(len(y))
        imp = np.zeros(d)
        _grow_tree(X[rows], y[rows], max_depth, mf, rng, imp)
        total += imp
    total /= n_trees
    s = total.sum()
    if s <= 0:
        raise InsufficientDataError("no informative split found in any tree")
    importance = total / s
    return [FeatureScore(name, math.nan, math.nan, float(importance[j]))
            for j, name in enumerate(data.names)]


@dataclass
class SelectionResult:
    features: list
    scores: list  # FeatureScore for every stage-1 candidate


def two_stage_select(data, admission_features=ADMISSION_FEATURES, k_filter=30, k_final=15,
                     n_trees=200, max_depth=8, seed=0, p_threshold=None):
    """Top-k_filter by F among non-admission columns, then top-k_final by Gini importance.

    Admission features bypass both stages and are appended; the result is in
    source-table grouping order.
    """
    missing = [a for a in admission_features if a not in data.names]
    if missing:
        raise ValueError(f"admission feature {missing[0]!r} not in data")
    candidates = [n for n in data.names if n not in admission_features]
    pool = data.select(candidates)
    f_scores = anova_f_scores(pool)
    if p_threshold is not None:
        f_scores_kept = [s for s in f_scores if s.p_value <= p_threshold]
    else:
        f_scores_kept = f_scores
    stage1 = select_top_k(f_scores_kept, min(k_filter, len(f_scores_kept)))

    by_name = {s.name: s for s in f_scores}
    if len(stage1) <= k_final:
        final = list(stage1)
    else:
        gini = rf_importance(pool.select(stage1), n_trees, max_depth, seed)
        for g in gini:
            by_name[g.name].gini_importance = g.gini_importance
        ranked = sorted(gini, key=lambda s: (-s.gini_importance, s.name))
        final = [s.name for s in ranked[:k_final]]
    for r, s in enumerate(sorted(f_scores, key=lambda s: (-s.f_statistic, s.name)), 1):
        s.rank = r
        s.selected = s.name in final
    return SelectionResult(table_order(final + list(admission_features)), f_scores)
