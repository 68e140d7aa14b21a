import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vancorisk.errors import ConfigError
from vancorisk.marginals import ClippedNormal
from vancorisk.schema import MODEL_FEATURE_NAMES, table_order
from vancorisk.uq import (Prior, SamplerConfig, _partners, dream_sample, effective_sample_size,
                          gelman_rubin, posterior_risk)

NAMES = table_order(MODEL_FEATURE_NAMES)


def _gauss(mu=0.0, sd=1.0):
    return lambda X: -0.5 * (((X - mu) / sd) ** 2).sum(1)


def test_gelman_rubin_hand():
    # two chains of length 2: means 1 and 3, within variances 2 and 2
    chains = np.array([[0.0, 2.0], [2.0, 4.0]])
    n, W, B = 2, 2.0, 2 * 2.0
    assert gelman_rubin(chains)[0] == pytest.approx(math.sqrt(((n - 1) / n * W + B / n) / W))


def test_diagnostics_on_iid_draws():
    x = np.random.default_rng(0).normal(size=(2000, 8, 2))
    assert np.abs(gelman_rubin(x) - 1).max() < 0.01
    ess = effective_sample_size(x)
    assert (ess > 0.7 * 16000).all() and (ess < 1.3 * 16000).all()


def test_partners_distinct():
    rng = np.random.default_rng(0)
    for C in (3, 4, 38):
        for _ in range(50):
            a, b = _partners(C, rng)
            i = np.arange(C)
            assert (a != i).all() and (b != i).all() and (a != b).all()
            assert a.max() < C and b.max() < C


def test_config_checks():
    with pytest.raises(ConfigError):
        SamplerConfig(n_chains=2).validate()
    with pytest.raises(ConfigError):
        SamplerConfig(burn_in_fraction=1.0).validate()
    with pytest.warns(UserWarning, match="chains"):
        SamplerConfig(n_chains=5).validate(dim=19)
    with pytest.raises(ConfigError):
        dream_sample(_gauss(), SamplerConfig(n_chains=5), np.zeros((4, 1)))


def test_one_dim_gaussian_recovered():
    cfg = SamplerConfig(n_chains=38, n_iterations=2000, seed=1)
    init = np.random.default_rng(1).normal(size=(38, 1))
    res = dream_sample(_gauss(2.0, 3.0), cfg, init)
    x = res.samples.ravel()
    assert abs(x.mean() - 2.0) < 0.02 * 3.0
    assert x.var() == pytest.approx(9.0, rel=0.02 * 2)
    assert res.rhat[0] < 1.05


def test_narrow_target_concentrates():
    cfg = SamplerConfig(n_chains=10, n_iterations=1000, seed=0)
    init = np.random.default_rng(0).normal(0.3, 1e-3, (10, 2))
    res = dream_sample(_gauss(0.3, 1e-3), cfg, init)
    assert res.samples.reshape(-1, 2).var(0).max() < 1.0
    assert np.abs(res.samples.reshape(-1, 2).mean(0) - 0.3).max() < 1e-3


def test_stagnation_warning():
    cfg = SamplerConfig(n_chains=6, n_iterations=40, seed=0)
    init = np.random.default_rng(0).normal(size=(6, 2))
    with pytest.warns(UserWarning, match="acceptance"):
        dream_sample(lambda X: np.where(np.abs(X).sum(1) > 0, 0.0, 0.0) - 1e9 * (
            ~np.isin(X, init).all(1)), cfg, init)


def test_seed_stability():
    means = []
    ses = []
    for seed in (0, 1):
        cfg = SamplerConfig(n_chains=20, n_iterations=1000, seed=seed)
        res = dream_sample(_gauss(), cfg, np.random.default_rng(seed).normal(size=(20, 3)))
        x = res.samples.reshape(-1, 3)
        means.append(x.mean(0))
        ses.append(x.std(0) / np.sqrt(res.ess))
    pooled = np.sqrt(ses[0] ** 2 + ses[1] ** 2)
    assert (np.abs(means[0] - means[1]) < 3 * pooled).all()


def test_deterministic_per_seed():
    cfg = SamplerConfig(n_chains=6, n_iterations=50, seed=3)
    init = np.random.default_rng(0).normal(size=(6, 2))
    a = dream_sample(_gauss(), cfg, init).samples
    np.testing.assert_array_equal(a, dream_sample(_gauss(), cfg, init).samples)


# ------------------------------------------------------------ priors

@pytest.mark.parametrize("group", ["elevation", "non_elevation", "cohort"])
def test_prior_round_trips(group):
    prior = Prior.from_schema(NAMES, group)
    Z = prior.sample_latent(500, np.random.default_rng(0))
    assert np.isfinite(prior.logpdf(Z)).all()
    U = prior.to_sampler(Z)
    np.testing.assert_allclose(prior.from_sampler(U), Z, rtol=1e-12, atol=1e-12)
    X = prior.to_features(Z)
    binary = [j for j, n in enumerate(NAMES) if n == "arterial_line"]
    assert set(np.unique(X[:, binary])) <= {0.0, 1.0}


def test_sampler_density_has_jacobian():
    # density of U integrates to one along one coordinate when the others are fixed
    prior = Prior(["x"], [(1.0, [ClippedNormal(5.0, 2.0)])])
    u = np.linspace(-8, 8, 4001)[:, None]
    mass = np.trapezoid(np.exp(prior.sampler_logpdf(u)), u[:, 0])
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_cohort_prior_profile_is_mixture():
    prior = Prior.from_schema(["phosphate"], "cohort", 0.282)
    assert prior.profile()[0] == pytest.approx(0.282 * 4.13 + 0.718 * 3.40)
    with pytest.raises(ConfigError):
        Prior.from_schema(["phosphate"], "everyone")


# ------------------------------------------------------------ posterior risk

def test_constant_model_point_mass():
    prior = Prior.from_schema(NAMES, "elevation")
    cfg = SamplerConfig(n_chains=38, n_iterations=200, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s, risk = posterior_risk(lambda X: np.full(len(X), 0.5), prior, cfg)
    assert (s.mean, s.cri_low, s.cri_high) == (0.5, 0.5, 0.5)
    assert risk.shape == (100, 38)


def test_width_mismatch():
    class M:
        n_features = 3

        def __call__(self, X):
            return np.zeros(len(X))

    with pytest.raises(ConfigError):
        posterior_risk(M(), Prior.from_schema(NAMES, "elevation"), SamplerConfig())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_risks_bounded_and_chain_exchangeable(seed):
    prior = Prior.from_schema(["phosphate", "ast"], "cohort")
    cfg = SamplerConfig(n_chains=8, n_iterations=100, seed=seed)
    f = lambda X: 1 / (1 + np.exp(-(X[:, 0] - 3.7)))  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s, risk = posterior_risk(f, prior, cfg)
    assert ((risk >= 0) & (risk <= 1)).all()
    flat = risk.ravel()
    assert s.cri_low in flat and s.cri_high in flat
    perm = risk[:, np.random.default_rng(seed).permutation(8)].ravel()
    assert np.quantile(perm, [0.025, 0.975], method="inverted_cdf").tolist() == \
        [s.cri_low, s.cri_high]
    assert perm.mean() == pytest.approx(s.mean, abs=1e-15)


def test_widening_prior_never_shrinks_cri(prepared):
    # the primary synthetic model under the elevation prior; a bounded model can
    # saturate under a wider prior, so this is an empirical check, not a theorem
    from vancorisk.models import fit_model, prior_shift_offset

    _, tr, trs, _, params = prepared
    model = fit_model({"family": "gbdt_ordered"}, trs)
    model.logit_offset = prior_shift_offset(trs.y.mean(), tr.y.mean())
    prior = Prior.from_schema(trs.names, "elevation")
    for seed in range(5):
        cfg = SamplerConfig(seed=seed)
        base, _ = posterior_risk(model, prior, cfg, params)
        wide, _ = posterior_risk(model, prior.widen(2.0), cfg, params)
        assert wide.cri_high - wide.cri_low >= base.cri_high - base.cri_low
