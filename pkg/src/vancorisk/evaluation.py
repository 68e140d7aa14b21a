"""Discrimination metrics, fixed-sensitivity operating points, CV and group tests."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientDataError
from .preprocess import fit_params, smote, stratified_folds, transform
from .stats import t_two_sided_p


def _check_binary(scores, labels):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if len(s) != len(y):
        raise ValueError("scores and labels differ in length")
    if y.all() or not y.any():
        raise InsufficientDataError("both classes must be present")
    return s, y


def _midranks(s):
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    bounds = np.flatnonzero(np.diff(ss)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(s)]])
    group_rank = (starts + ends + 1) / 2.0  # 1-based average rank of each tie group
    ranks = np.empty(len(s))
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def auroc(scores, labels):
    """Mann-Whitney AUROC: P(pos > neg) + 0.5 P(tie), via midranks."""
    s, y = _check_binary(scores, labels)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    r = _midranks(s)
    u = r[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels):
    """(fpr, tpr, thresholds) over distinct score thresholds, score >= thr is positive."""
    s, y = _check_binary(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    ss, yy = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(ss)), len(ss) - 1]
    tps = np.cumsum(yy)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / y.sum()]
    fpr = np.r_[0.0, fps / (~y).sum()]
    thr = np.r_[np.inf, ss[last]]
    return fpr, tpr, thr


def _bootstrap_chunk(group, y, n_groups, n_rep, rng):
    n = len(y)
    out = np.empty(n_rep)
    filled = 0
    while filled < n_rep:
        m = n_rep - filled
        idx = rng.integers(0, n, (m, n))
        g = group[idx]
        lab = y[idx]
        rows = np.repeat(np.arange(m), n)
        flat = rows * n_groups + g.ravel()
        pos = np.bincount(flat[lab.ravel()], minlength=m * n_groups).reshape(m, n_groups)
        neg = np.bincount(flat[~lab.ravel()], minlength=m * n_groups).reshape(m, n_groups)
        tot_p, tot_n = pos.sum(1), neg.sum(1)
        ok = (tot_p > 0) & (tot_n > 0)  # resamples lacking a class are redrawn
        below = np.cumsum(neg, axis=1) - neg
        num = (pos * (below + 0.5 * neg)).sum(1)
        auc = num[ok] / (tot_p[ok] * tot_n[ok])
        out[filled:filled + len(auc)] = auc
        filled += len(auc)
    return out


def bootstrap_aurocs(scores, labels, n_boot=2000, seed=0, chunk=100, workers=1):
    s, y = _check_binary(scores, labels)
    _, group = np.unique(s, return_inverse=True)
    n_groups = int(group.max()) + 1
    sizes = [min(chunk, n_boot - i) for i in range(0, n_boot, chunk)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(k):
        return _bootstrap_chunk(group, y, n_groups, sizes[k], np.random.default_rng(streams[k]))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    return np.concatenate(parts) if parts else np.empty(0)


def bootstrap_ci(scores, labels, n_boot=2000, alpha=0.05, seed=0, workers=1):
    """Percentile bootstrap interval for AUROC over (score, label) pair resamples."""
    aucs = bootstrap_aurocs(scores, labels, n_boot, seed, workers=workers)
    lo, hi = np.percentile(aucs, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def threshold_at_sensitivity(scores, labels, target=0.8):
    """Largest threshold whose sensitivity (score >= threshold) reaches ``target``.

    Candidates are the positive scores; the k-th largest with k the smallest
    count meeting the target is returned.
    """
    if not 0 < target <= 1:
        raise ValueError("target sensitivity must lie in (0, 1]")
    s, y = _check_binary(scores, labels)
    pos = np.sort(s[y])[::-1]
    n_pos = len(pos)
    k = max(1, math.ceil(target * n_pos - 1e-9))
    while k < n_pos and k / n_pos < target:
        k += 1
    return float(pos[k - 1])


def _ratio(a, b):
    return a / b if b else None


def confusion_metrics(scores, labels, threshold):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    pred = s >= threshold
    tp = int((pred & y).sum())
    fp = int((pred & ~y).sum())
    tn = int((~pred & ~y).sum())
    fn = int((~pred & y).sum())
    return {
        "tp": tp, "fp": fp, "tn": tn, "fn": fn,
        "accuracy": _ratio(tp + tn, tp + tn + fp + fn),
        "f1": _ratio(2 * tp, 2 * tp + fp + fn),
        "sensitivity": _ratio(tp, tp + fn),
        "specificity": _ratio(tn, tn + fp),
        "ppv": _ratio(tp, tp + fp),
        "npv": _ratio(tn, tn + fn),
    }


@dataclass
class MetricsReport:
    auroc: float
    auroc_ci_low: float | None
    auroc_ci_high: float | None
    threshold: float
    accuracy: float | None
    f1: float | None
    sensitivity: float | None
    specificity: float | None
    ppv: float | None
    npv: float | None
    n_pos: int
    n_neg: int
    family: str = ""
    threshold_source: str = "test_scores"
    target_sensitivity: float = 0.8
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def evaluate_scores(scores, labels, target_sensitivity=0.8, n_boot=2000, alpha=0.05,
                    seed=0, family="", threshold_source="test_scores", workers=1):
    """Full report: AUROC with bootstrap CI and metrics at the fixed-sensitivity threshold.

    The threshold is read off the same scores being evaluated.
    """
    s, y = _check_binary(scores, labels)
    thr = threshold_at_sensitivity(s, y, target_sensitivity)
    cm = confusion_metrics(s, y, thr)
    lo = hi = None
    if n_boot:
        lo, hi = bootstrap_ci(s, y, n_boot, alpha, seed, workers=workers)
    return MetricsReport(
        auroc=auroc(s, y), auroc_ci_low=lo, auroc_ci_high=hi, threshold=thr,
        accuracy=cm["accuracy"], f1=cm["f1"], sensitivity=cm["sensitivity"],
        specificity=cm["specificity"], ppv=cm["ppv"], npv=cm["npv"],
        n_pos=int(y.sum()), n_neg=int((~y).sum()), family=family,
        threshold_source=threshold_source, target_sensitivity=target_sensitivity)


def cross_validate(train, model_config, n_folds=5, seed=0, smote_k=5, smote_ratio=1.0,
                   use_smote=True, smote_outside=False, target_sensitivity=0.8, workers=1):
    """Stratified k-fold CV with preprocessing and SMOTE fitted on each fold-train.

    ``smote_outside=True`` reproduces the leaky protocol (scale and oversample
    the whole training set, then fold); it exists as a negative control.
    """
    from .models import fit_model, predict_proba

    data = train
    if smote_outside:
        data = transform(train, fit_params(train))
        if use_smote:
            data = smote(data, smote_k, smote_ratio, seed)
    folds = stratified_folds(data.y, n_folds, seed)
    seeds = np.random.SeedSequence(seed).spawn(n_folds)

    def run(k):
        fold_seed = int(seeds[k].generate_state(1)[0])
        tr, va = data.subset(folds != k), data.subset(folds == k)
        if not smote_outside:
            params = fit_params(tr)
            tr, va = transform(tr, params), transform(va, params)
            if use_smote:
                tr = smote(tr, smote_k, smote_ratio, fold_seed)
        model = fit_model(model_config, tr, seed=fold_seed)
        p = predict_proba(model, va.X)
        rep = evaluate_scores(p, va.y, target_sensitivity, n_boot=0,
                              family=model_config.get("family", ""),
                              threshold_source="validation_fold")
        rep.extra = {"fold": k, "n_train": tr.n, "n_valid": va.n}
        return rep

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(run, range(n_folds)))
    return [run(k) for k in range(n_folds)]


def welch_ttest(sample_a, sample_b):
    """Two-sided Welch t-test; returns (t, p, df)."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    a, b = a[~np.isnan(a)], b[~np.isnan(b)]
    if len(a) < 2 or len(b) < 2:
        raise InsufficientDataError("each sample needs at least 2 values")
    na, nb = len(a), len(b)
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return 0.0, 1.0, float(na + nb - 2)
        return math.copysign(math.inf, diff), 0.0, float(na + nb - 2)
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1))
    return float(t), t_two_sided_p(t, df), float(df)


def compare_groups(dataset, mask_a, mask_b, names=("a", "b")):
    """Per-feature mean (SD) in two row groups with a Welch test, one dict per feature."""
    mask_a, mask_b = np.asarray(mask_a, bool), np.asarray(mask_b, bool)
    if not mask_a.any() or not mask_b.any():
        raise InsufficientDataError("both groups must be nonempty")
    na, nb = names
    rows = []
    for j, f in enumerate(dataset.features):
        a = dataset.X[mask_a, j]
        b = dataset.X[mask_b, j]
        a, b = a[~np.isnan(a)], b[~np.isnan(b)]
        t, p, df = welch_ttest(a, b)
        rows.append({"feature": f.name, "unit": f.unit,
                     f"n_{na}": len(a), f"mean_{na}": float(a.mean()),
                     f"sd_{na}": float(a.std(ddof=1)),
                     f"n_{nb}": len(b), f"mean_{nb}": float(b.mean()),
                     f"sd_{nb}": float(b.std(ddof=1)),
                     "t": t, "df": df, "p_value": p})
    return rows
