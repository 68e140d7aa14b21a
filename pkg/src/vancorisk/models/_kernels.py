"""numba kernels for histogram split search and flat-tree prediction."""

import numpy as np
from numba import njit

MAX_BINS = 64


@njit(cache=True)
def best_split(bins, n_bins, rows, g, h, lam, min_leaf, min_hess):
    """Best (gain, feature, bin) over all features for the rows of one node.

    Left child takes bin <= b. The first maximum in (feature, bin) order wins.
    Returns feature -1 when no admissible split exists.
    """
    d = bins.shape[1]
    hg = np.zeros((d, MAX_BINS))
    hh = np.zeros((d, MAX_BINS))
    hc = np.zeros((d, MAX_BINS), dtype=np.int64)
    G = 0.0
    H = 0.0
    for r in rows:
        gr = g[r]
        hr = h[r]
        G += gr
        H += hr
        for j in range(d):
            b = bins[r, j]
            hg[j, b] += gr
            hh[j, b] += hr
            hc[j, b] += 1
    n = rows.shape[0]
    parent = G * G / (H + lam)
    best_gain = -np.inf
    best_f = -1
    best_b = -1
    for j in range(d):
        gl = 0.0
        hl = 0.0
        cl = 0
        for b in range(n_bins[j] - 1):
            gl += hg[j, b]
            hl += hh[j, b]
            cl += hc[j, b]
            cr = n - cl
            if cl < min_leaf or cr < min_leaf:
                continue
            hr_ = H - hl
            if hl < min_hess or hr_ < min_hess:
                continue
            gr_ = G - gl
            gain = 0.5 * (gl * gl / (hl + lam) + gr_ * gr_ / (hr_ + lam) - parent)
            if gain > best_gain:
                best_gain = gain
                best_f = j
                best_b = b
    return best_gain, best_f, best_b, G, H


@njit(cache=True)
def predict_flat(X, feature, threshold, left, right, value, roots):
    """Sum of leaf values over all trees; x <= threshold goes left, NaN goes right."""
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for t in range(roots.shape[0]):
            k = roots[t]
            while feature[k] >= 0:
                if X[i, feature[k]] <= threshold[k]:
                    k = left[k]
                else:
                    k = right[k]
            s += value[k]
        out[i] = s
    return out


@njit(cache=True)
def apply_flat(X, feature, threshold, left, right, root):
    """Leaf node index reached by each row in one tree."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        k = root
        while feature[k] >= 0:
            if X[i, feature[k]] <= threshold[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = k
    return out
