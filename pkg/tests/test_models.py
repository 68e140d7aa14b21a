import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vancorisk.dataset import Dataset
from vancorisk.errors import (ConfigError, SchemaError, TrainingDivergedError,
                              UnsupportedModelError)
from vancorisk.models import (FAMILIES, TREE_FAMILIES, TrainedModel, fit_model, grid_configs,
                              predict_proba, prior_shift_offset, resolve_config)
from vancorisk.models import gbdt, logreg, mlp
from vancorisk.models.gnb import train_gnb, raw as gnb_raw

XOR_X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
XOR_Y = np.array([0, 0, 1, 1])


def _toy(seed=0, n=300, d=4):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.normal(size=n) > 0.8).astype(int)
    return Dataset(X, y)


def _fd_rel_error(f, x, analytic, h=1e-6):
    num = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        num[i] = (f(x + e) - f(x - e)) / (2 * h)
    return np.abs(num - analytic).max() / max(np.abs(num).max(), np.abs(analytic).max(), 1e-12)


# ------------------------------------------------------------ config / plumbing

def test_config_validation():
    with pytest.raises(UnsupportedModelError):
        resolve_config({"family": "svm"})
    with pytest.raises(ConfigError):
        resolve_config({"family": "logreg", "depth": 3})
    with pytest.raises(ConfigError):
        fit_model({"family": "gbdt_levelwise", "learning_rate": -0.1}, _toy())
    assert len(grid_configs("logreg")) == 4


@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_contract(family, tmp_path):
    data = _toy()
    cfg = {"family": family}
    if family in TREE_FAMILIES:
        cfg["n_rounds"] = 30
    if family == "mlp":
        cfg["epochs"] = 5
    m = fit_model(cfg, data, seed=3)
    p = predict_proba(m, data.X)
    assert p.shape == (data.n,) and np.isfinite(p).all() and ((p >= 0) & (p <= 1)).all()
    # batch equals per-row, batch-of-1 equals single call, empty batch
    rows = np.array([predict_proba(m, x) for x in data.X[:20]])
    np.testing.assert_array_equal(rows, p[:20])
    assert predict_proba(m, data.X[:1])[0] == predict_proba(m, data.X[0])
    assert predict_proba(m, np.empty((0, 4))).shape == (0,)
    with pytest.raises(SchemaError):
        predict_proba(m, np.ones((2, 3)))
    # exact round trip through JSON
    m.save(tmp_path / "m.json")
    back = TrainedModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(predict_proba(back, data.X), p)
    # determinism
    np.testing.assert_array_equal(predict_proba(fit_model(cfg, data, seed=3), data.X), p)


def test_bad_schema_version():
    d = fit_model({"family": "gaussian_nb"}, _toy()).to_dict()
    d["schema_version"] = 99
    with pytest.raises(SchemaError):
        TrainedModel.from_dict(d)


def test_prior_shift_offset():
    assert prior_shift_offset(0.5, 0.5) == 0.0
    off = prior_shift_offset(0.5, 0.282)
    assert 1 / (1 + math.exp(-off)) == pytest.approx(0.282)


# ------------------------------------------------------------ GBDT

def _hand_model():
    t1 = {"feature": 0, "threshold": 0.5, "cover": 4.0,
          "left": {"value": -1.0, "cover": 2.0},
          "right": {"feature": 1, "threshold": 2.0, "cover": 2.0,
                    "left": {"value": 0.5, "cover": 1.0}, "right": {"value": 2.0, "cover": 1.0}}}
    t2 = {"feature": 1, "threshold": 0.0, "cover": 4.0,
          "left": {"value": 0.25, "cover": 3.0}, "right": {"value": -0.75, "cover": 1.0}}
    params = {"base_score": 0.1, "trees": [gbdt.tree_from_nested(t) for t in (t1, t2)]}
    return TrainedModel("gbdt_levelwise", {}, params, [], ["a", "b"]), (t1, t2)


def _walk(nd, x):
    while "feature" in nd:
        nd = nd["left"] if x[nd["feature"]] <= nd["threshold"] else nd["right"]
    return nd["value"]


def test_hand_built_two_trees():
    m, trees = _hand_model()
    X = np.array([[0.0, -1.0], [0.5, 0.0], [0.7, 2.0], [0.7, 2.5], [1.0, 0.0]])
    for x, p in zip(X, predict_proba(m, X)):
        z = 0.1 + sum(_walk(t, x) for t in trees)
        assert p == pytest.approx(1 / (1 + math.exp(-z)), rel=1e-15)
    assert [gbdt.tree_to_nested(t) for t in m.params["trees"]] == list(trees)


@pytest.mark.parametrize("variant", ["ordered", "leafwise", "levelwise"])
def test_xor_solved(variant):
    params, _ = gbdt.train_gbdt(XOR_X, XOR_Y, variant=variant, n_rounds=50, max_depth=2)
    z = gbdt.FlatEnsemble(params["base_score"], params["trees"]).raw(XOR_X)
    assert ((z > 0).astype(int) == XOR_Y).all()


def test_zero_learning_rate_gives_base_rate():
    data = _toy()
    m = fit_model({"family": "gbdt_ordered", "n_rounds": 1, "learning_rate": 0.0}, data)
    np.testing.assert_allclose(predict_proba(m, data.X), data.y.mean(), rtol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["ordered", "leafwise", "levelwise"]))
def test_gbdt_trace_monotone(seed, variant):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(150, 3))
    y = (rng.random(150) < 1 / (1 + np.exp(-X[:, 0]))).astype(int)
    if y.min() == y.max():
        return
    _, trace = gbdt.train_gbdt(X, y, seed=seed, variant=variant, n_rounds=40,
                               learning_rate=0.3)
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_nan_goes_right_and_bins():
    cuts = gbdt.make_cuts(np.array([1.0, 2.0, 3.0, 4.0]), max_bins=4)
    b = gbdt.bin_columns(np.array([[1.0], [4.0]]), [cuts])
    assert b[0, 0] < b[1, 0]


def test_leafwise_respects_leaf_budget():
    data = _toy(n=500)
    params, _ = gbdt.train_gbdt(data.X, data.y, variant="leafwise", n_rounds=3, max_depth=10,
                                max_leaves=5)
    for t in params["trees"]:
        assert (np.asarray(t["feature"]) < 0).sum() <= 5


# ------------------------------------------------------------ logistic regression

def test_logreg_gradient_fd():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.normal(size=(30, 4))
        y = rng.integers(0, 2, 30).astype(float)
        w, b = rng.normal(size=4), float(rng.normal())
        lam = float(rng.uniform(0, 0.1))
        gw, gb = logreg.grad(w, b, X, y, lam)
        theta = np.r_[w, b]
        f = lambda t: logreg.loss(t[:4], t[4], X, y, lam)  # noqa: E731
        assert _fd_rel_error(f, theta, np.r_[gw, gb]) < 1e-6


def test_logreg_shrinks_to_base_rate():
    data = _toy()
    params, _ = logreg.train_logreg(data.X, data.y, lam=1e6)
    assert np.abs(params["weights"]).max() < 1e-4
    r = data.y.mean()
    assert params["intercept"] == pytest.approx(math.log(r / (1 - r)), abs=1e-3)


def test_logreg_sign():
    params, _ = logreg.train_logreg(np.array([[-1.0], [1.0]]), np.array([0, 1]), lam=1e-3)
    assert params["weights"][0] > 0


def test_l1_sparsity_monotone():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(400, 8))
    y = (X[:, 0] - 0.5 * X[:, 1] + 0.2 * X[:, 2] + rng.normal(size=400) > 0).astype(int)
    counts = []
    for lam in (1e-4, 1e-3, 1e-2, 3e-2, 1e-1):
        params, _ = logreg.train_logreg(X, y, penalty="l1", lam=lam)
        counts.append(int((np.abs(params["weights"]) > 1e-8).sum()))
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] < counts[0]


def test_logreg_rejects_bad_penalty():
    with pytest.raises(ConfigError):
        logreg.train_logreg(np.ones((4, 1)), np.array([0, 1, 0, 1]), penalty="elastic")


def test_logreg_warns_on_max_iter():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 3))
    y = (X[:, 0] > 0).astype(int)
    with pytest.warns(UserWarning):
        logreg.train_logreg(X, y, penalty="l1", lam=1e-6, max_iter=3)


# ------------------------------------------------------------ Gaussian NB

def test_gnb_symmetric():
    X = np.array([[-1.5], [-0.5], [0.5], [1.5]])
    params, _ = train_gnb(X, np.array([0, 0, 1, 1]))
    assert 1 / (1 + math.exp(-gnb_raw(params, [[0.0]])[0])) == pytest.approx(0.5, abs=1e-9)


def test_gnb_separated():
    rng = np.random.default_rng(0)
    X = np.r_[rng.normal(-3, 1, 500), rng.normal(3, 1, 500)][:, None]
    y = np.r_[np.zeros(500), np.ones(500)]
    params, _ = train_gnb(X, y)
    p = 1 / (1 + np.exp(-gnb_raw(params, [[-3.0], [3.0]])))
    assert 1 - p[0] > 0.95 and p[1] > 0.95


def test_gnb_prior_only():
    # both classes hold the same values (-1, 1) in equal proportion
    rng = np.random.default_rng(0)
    X = np.r_[np.tile([[-1.0], [1.0]], (141, 3)), np.tile([[-1.0], [1.0]], (359, 3))]
    y = np.r_[np.ones(282), np.zeros(718)]
    params, _ = train_gnb(X, y)
    p = 1 / (1 + np.exp(-gnb_raw(params, rng.normal(size=(10, 3)))))
    np.testing.assert_allclose(p, 0.282, atol=1e-12)


# ------------------------------------------------------------ MLP

def test_mlp_gradient_fd():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.normal(size=(10, 3))
        y = rng.integers(0, 2, 10).astype(float)
        params = mlp.init_params(3, 3, rng)
        params["b1"] = rng.normal(size=3)
        L, g = mlp.loss_and_grad(params, X, y)
        for k in params:
            def f(v, k=k):
                q = {**params, k: v.reshape(params[k].shape)}
                return mlp.loss_and_grad(q, X, y)[0]
            assert _fd_rel_error(f, params[k].ravel().copy(), g[k].ravel(), h=1e-5) < 1e-4, k


def test_mlp_dropout_gradient_fd():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(10, 3))
    y = rng.integers(0, 2, 10).astype(float)
    params = mlp.init_params(3, 4, rng)
    mask = (rng.random((10, 4)) >= 0.3) / 0.7
    _, g = mlp.loss_and_grad(params, X, y, mask, l2=0.1)
    f = lambda v: mlp.loss_and_grad({**params, "W1": v.reshape(3, 4)}, X, y, mask, 0.1)[0]  # noqa
    assert _fd_rel_error(f, params["W1"].ravel().copy(), g["W1"].ravel(), h=1e-5) < 1e-4


def test_adam_quadratic():
    w = np.array([1.0])
    opt = mlp.Adam()
    for step in range(1, 501):
        opt.step([w], [2 * w])
        if abs(w[0]) < 1e-3:
            break
    assert abs(w[0]) < 1e-3 and step <= 500


def test_zero_hidden_matches_logreg():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(size=200) > 0).astype(float)
    p_mlp, _ = mlp.train_mlp(X, y, hidden_units=0, dropout=0.0, learning_rate=0.05,
                             batch_size=200, epochs=3000)
    p_lr, _ = logreg.train_logreg(X, y, lam=0.0)
    l_mlp = logreg.loss(p_mlp["W2"], p_mlp["b2"][0], X, y)
    l_lr = logreg.loss(p_lr["weights"], p_lr["intercept"], X, y)
    assert abs(l_mlp - l_lr) < 1e-6


def test_mlp_divergence_names_epoch():
    X = np.random.default_rng(0).normal(size=(50, 3))
    y = (X[:, 0] > 0).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(TrainingDivergedError, match="epoch 1"):
            mlp.train_mlp(X, y, hidden_units=4, learning_rate=1e308, epochs=3)


def test_config_round_trip_json():
    m = fit_model({"family": "logreg", "penalty": "l1", "lam": 1e-2}, _toy())
    d = json.loads(json.dumps(m.to_dict()))
    assert TrainedModel.from_dict(d).config == m.config
