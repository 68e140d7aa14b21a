import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import path_dependent_value, shapley_bruteforce
from vancorisk.dataset import Dataset, FeatureMeta
from vancorisk.errors import UnsupportedModelError
from vancorisk.interpret import (ablation, ale_centered_mean, ale_curve, shap_summary,
                                 shap_tree, shap_values)
from vancorisk.models import TrainedModel, fit_model, predict_raw
from vancorisk.models.gbdt import tree_from_nested, tree_to_nested


def _model(trees, d, base=0.0):
    params = {"base_score": base, "trees": [tree_from_nested(t) for t in trees]}
    return TrainedModel("gbdt_levelwise", {}, params, [], [f"x{j}" for j in range(d)])


def leaf(v, c):
    return {"value": v, "cover": c}


def node(f, thr, left, right):
    return {"feature": f, "threshold": thr, "cover": left["cover"] + right["cover"],
            "left": left, "right": right}


def test_single_leaf_tree():
    base, phi = shap_values(_model([leaf(0.7, 10.0)], 3, base=0.2), np.ones((2, 3)))
    assert base == pytest.approx(0.9) and (phi == 0).all()


def test_stump_only_its_feature():
    m = _model([node(1, 0.5, leaf(-1.0, 3.0), leaf(2.0, 1.0))], 3)
    _, phi = shap_values(m, np.array([[0.0, 0.9, 5.0], [9.0, 0.1, 0.0]]))
    assert (phi[:, [0, 2]] == 0).all() and (phi[:, 1] != 0).all()


def test_symmetry_of_identical_features():
    # f = [x0 > .5] * [x1 > .5] on uniform covers
    t = node(0, 0.5, leaf(0.0, 2.0), node(1, 0.5, leaf(0.0, 1.0), leaf(1.0, 1.0)))
    _, phi = shap_values(_model([t], 2), np.array([[1.0, 1.0], [0.0, 0.0]]))
    assert phi[0, 0] == pytest.approx(0.375, abs=1e-15) and phi[0, 0] == phi[0, 1]
    assert phi[1, 0] == pytest.approx(phi[1, 1], abs=1e-15)


def test_rejects_non_tree():
    rng = np.random.default_rng(0)
    m = fit_model({"family": "logreg"}, Dataset(rng.random((20, 2)), [0, 1] * 10))
    with pytest.raises(UnsupportedModelError):
        shap_values(m, np.zeros((1, 2)))


def _small_trained(seed, d, n_trees, depth):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(120, d))
    y = (X[:, 0] * X[:, -1] + 0.5 * rng.normal(size=120) > 0).astype(int)
    y[:2] = [0, 1]
    m = fit_model({"family": "gbdt_levelwise", "n_rounds": n_trees, "max_depth": depth,
                   "min_samples_leaf": 3, "learning_rate": 0.5}, Dataset(X, y), seed)
    return m, X


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 3))
def test_matches_bruteforce_shapley(seed, d, n_trees, depth):
    m, X = _small_trained(seed, d, n_trees, depth)
    nested = [tree_to_nested(t) for t in m.params["trees"]]
    base, phi = shap_values(m, X[:5])
    for x, row in zip(X[:5], phi):
        def value(S, x=x):
            return m.params["base_score"] + path_dependent_value(nested, x, S)
        assert base == pytest.approx(value(set()), abs=1e-12)
        np.testing.assert_allclose(row, shapley_bruteforce(value, d), atol=1e-8, rtol=0)


def test_local_accuracy_and_dummy(prepared):
    _, _, trs, te, _ = prepared
    m = fit_model({"family": "gbdt_ordered", "n_rounds": 60}, trs)
    base, phi = shap_values(m, te.X[:1000])
    err = np.abs(base + phi.sum(1) - predict_raw(m, te.X[:1000])).max()
    assert err < 1e-6
    used = set(np.concatenate([np.asarray(t["feature"]) for t in m.params["trees"]]))
    for j in range(te.d):
        if j not in used:
            assert (phi[:, j] == 0).all()
    e = shap_tree(m, te.X[0])
    assert e.base_value + e.phi.sum() == pytest.approx(e.prediction, abs=1e-9)


def test_summary_one_feature_and_row_order():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 3))
    y = (X[:, 2] > 0).astype(int)
    data = Dataset(X, y, ["a", "b", "c"])
    m = fit_model({"family": "gbdt_levelwise", "n_rounds": 10, "max_depth": 1}, data)
    ranking, _, _ = shap_summary(m, data)
    assert ranking[0]["feature"] == "c" and ranking[0]["share"] == 1.0
    perm = data.subset(rng.permutation(200))
    ranking2, _, _ = shap_summary(m, perm)
    assert [r["feature"] for r in ranking2] == [r["feature"] for r in ranking]
    assert [r["mean_abs_shap"] for r in ranking2] == pytest.approx(
        [r["mean_abs_shap"] for r in ranking], rel=1e-12)


# ------------------------------------------------------------ ALE

def _uniform(n, d, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.random((n, d)), rng.integers(0, 2, n))


def test_ale_linear_slope():
    data = _uniform(2000, 3)
    w = np.array([2.5, -1.0, 0.0])
    for j in range(3):
        c = ale_curve(lambda Z: Z @ w, data, f"x{j}", n_bins=16)
        slope = np.diff(c.effects) / np.diff(c.edges)
        assert np.abs(slope - w[j]).max() < 1e-6
        assert abs(ale_centered_mean(c)) < 1e-9
    flat = ale_curve(lambda Z: Z @ w, data, "x2")
    assert np.abs(flat.effects).max() == 0


def test_ale_additive_recovery():
    data = _uniform(10000, 2, seed=4)
    g = lambda v: np.sin(3 * v)  # noqa: E731
    c = ale_curve(lambda Z: g(Z[:, 0]) + Z[:, 1] ** 2, data, "x0", n_bins=32)
    dev = c.effects - g(c.edges)
    assert np.abs(dev - dev.mean()).max() < 0.02


def test_ale_input_checks():
    data = Dataset(np.c_[np.random.default_rng(0).random(10), np.r_[np.zeros(5), np.ones(5)]],
                   [0, 1] * 5, [FeatureMeta("a"), FeatureMeta("b", "binary")])
    with pytest.raises(ValueError):
        ale_curve(lambda Z: Z[:, 0], data, "b")
    with pytest.raises(ValueError):
        ale_curve(lambda Z: Z[:, 0], data, "a", n_bins=1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 40))
def test_ale_centering_property(seed, n_bins):
    rng = np.random.default_rng(seed)
    data = Dataset(np.round(rng.random((300, 2)), 2), rng.integers(0, 2, 300))
    c = ale_curve(lambda Z: np.tanh(Z[:, 0] * Z[:, 1] * 3), data, "x0", n_bins)
    assert abs(ale_centered_mean(c)) < 1e-9
    assert c.counts.sum() == 300


# ------------------------------------------------------------ ablation

def _ablation_data(n, seed):
    rng = np.random.default_rng(seed)
    signal = rng.normal(size=n)
    other = rng.normal(size=n)
    noise = rng.normal(size=n)
    y = (signal + 0.7 * other + rng.normal(size=n) > 0).astype(int)
    X = np.c_[signal, signal, other, noise]
    return Dataset(X, y, ["sig", "sig_copy", "other", "noise"])


def test_ablation_duplicate_and_noise():
    train, test = _ablation_data(5000, 0), _ablation_data(5000, 1)
    rows = {r["feature"]: r for r in ablation(train, test, train.names, n_boot=3, seed=0)}
    assert abs(rows["sig"]["delta_auc"]) < 0.002
    assert abs(rows["sig_copy"]["delta_auc"]) < 0.002
    assert abs(rows["noise"]["delta_auc"]) < 0.01
    assert rows["other"]["rank"] == 1
    r = rows["other"]
    assert r["auc_full"] - r["auc_without"] == pytest.approx(r["delta_auc"])
    assert r["boot_low"] <= r["boot_mean"] <= r["boot_high"]


def test_ablation_needs_two_features():
    d = _ablation_data(50, 0)
    with pytest.raises(ValueError):
        ablation(d, d, ["sig"])
