"""Static SVG figures. Output is byte-stable: fixed hash salt, no date metadata."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({"svg.hashsalt": "vancorisk", "svg.fonttype": "none",
                     "font.size": 9, "axes.spines.top": False,
                     "axes.spines.right": False})


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def roc_plot(curves, path):
    """``curves``: {family: (fpr, tpr, auroc)}."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], color="0.7", lw=0.8, ls="--")
    for name, (fpr, tpr, auc) in curves.items():
        ax.plot(fpr, tpr, lw=1.2, label=f"{name} ({auc:.3f})")
    ax.set_xlabel("1 - specificity")
    ax.set_ylabel("Sensitivity")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(loc="lower right", frameon=False)
    _save(fig, path)


def ablation_plot(rows, path):
    rows = sorted(rows, key=lambda r: r["delta_auc"])
    names = [r["feature"] for r in rows]
    auc_full = rows[0]["auc_full"]
    without = np.array([r["auc_without"] for r in rows])
    err = np.array([r["boot_sd"] or 0.0 for r in rows])
    fig, ax = plt.subplots(figsize=(6, 0.28 * len(rows) + 1))
    ax.barh(names, without, xerr=err, color="#6a8caf", height=0.6)
    ax.axvline(auc_full, color="#c0392b", ls="--", lw=1, label=f"all features ({auc_full:.3f})")
    lo = min(without.min(), auc_full) - 0.01
    ax.set_xlim(lo, auc_full + 0.01)
    ax.set_xlabel("AUROC without feature")
    ax.legend(loc="lower right", frameon=False)
    _save(fig, path)


def shap_beeswarm(names, phi, values, path, max_features=19, seed=0):
    """Per-feature horizontal strip of phi values colored by scaled feature value."""
    order = np.argsort(-np.abs(phi).mean(0), kind="stable")[:max_features][::-1]
    rng = np.random.default_rng(seed)
    fig, ax = plt.subplots(figsize=(6.5, 0.3 * len(order) + 1))
    for pos, j in enumerate(order):
        v = values[:, j]
        span = np.nanmax(v) - np.nanmin(v)
        c = (v - np.nanmin(v)) / span if span > 0 else np.zeros_like(v)
        ax.scatter(phi[:, j], pos + rng.uniform(-0.3, 0.3, len(v)), c=c, cmap="coolwarm",
                   s=3, lw=0, rasterized=False)
    ax.set_yticks(range(len(order)))
    ax.set_yticklabels([names[j] for j in order])
    ax.axvline(0, color="0.6", lw=0.6)
    ax.set_xlabel("SHAP value (log-odds)")
    _save(fig, path)


def ale_plot(curves, path, cols=4):
    n = len(curves)
    rows = max(1, int(np.ceil(n / cols)))
    fig, axes = plt.subplots(rows, cols, figsize=(2.6 * cols, 2.0 * rows), squeeze=False)
    for ax, c in zip(axes.ravel(), curves):
        ax.plot(c.edges, c.effects, lw=1.2, color="#2c3e50")
        ax.axhline(0, color="0.7", lw=0.6)
        ax.set_title(c.feature, fontsize=8)
    for ax in axes.ravel()[n:]:
        ax.axis("off")
    fig.supylabel("ALE (probability)")
    fig.tight_layout()
    _save(fig, path)


def posterior_plot(summaries, path):
    """``summaries``: {label: PosteriorSummary-like dict}."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, s in summaries.items():
        edges = np.asarray(s["hist_edges"])
        counts = np.asarray(s["hist_counts"], dtype=float)
        dens = counts / (counts.sum() * np.diff(edges))
        ax.stairs(dens, edges, label=f"{label}: mean {s['mean']:.3f} "
                                     f"[{s['cri_low']:.3f}, {s['cri_high']:.3f}]")
        ax.axvline(s["mean"], lw=0.8, ls="--", color="0.4")
    ax.set_xlabel("Predicted risk")
    ax.set_ylabel("Density")
    ax.set_xlim(0, 1)
    ax.legend(frameon=False, fontsize=7)
    _save(fig, path)
