"""Differential-evolution adaptive Metropolis (DREAM-style) over patient feature
space, and the posterior risk obtained by pushing draws through a fixed model.

The sampled quantity is a feature vector drawn from a group-conditional prior,
not model parameters; the classifier is never refit. Risk for each retained
draw is the model's predicted probability, and the summary averages over all
chains and retained iterations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, InsufficientDataError
from .marginals import Bernoulli, LogNormal, make_marginal
from .preprocess import scale_array
from .schema import BY_NAME


@dataclass
class SamplerConfig:
    n_chains: int = 38
    n_iterations: int = 2000
    burn_in_fraction: float = 0.5
    crossover_prob: float = 0.9
    jump_scale: float = 2.38  # gamma = jump_scale / sqrt(2 d')
    unit_jump_every: int = 5  # gamma = 1 on every k-th generation
    jitter: float = 0.05  # multiplicative (1 + U(-b, b)) on the jump
    noise: float = 1e-6
    seed: int = 0

    def validate(self, dim=None):
        if self.n_chains < 3:
            raise ConfigError("DREAM needs at least 3 chains")
        if self.n_iterations < 2:
            raise ConfigError("n_iterations must be >= 2")
        if not 0 <= self.burn_in_fraction < 1:
            raise ConfigError("burn_in_fraction must lie in [0, 1)")
        if not 0 < self.crossover_prob <= 1:
            raise ConfigError("crossover_prob must lie in (0, 1]")
        if dim is not None and self.n_chains < 2 * dim:
            warnings.warn(f"{self.n_chains} chains for {dim} dimensions; at least "
                          f"{2 * dim} are recommended", stacklevel=3)
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class DreamResult:
    samples: np.ndarray  # (n_retained, n_chains, d)
    log_density: np.ndarray  # (n_retained, n_chains)
    acceptance_rate: float
    rhat: np.ndarray
    ess: np.ndarray


def gelman_rubin(chains):
    """Potential scale reduction per dimension; ``chains`` is (n, m[, d])."""
    x = np.asarray(chains, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    n = x.shape[0]
    means = x.mean(0)
    B = n * means.var(0, ddof=1)
    W = x.var(0, ddof=1).mean(0)
    var_plus = (n - 1) / n * W + B / n
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(var_plus / W)
    return np.where(W > 0, r, 1.0)


def effective_sample_size(chains):
    """Multi-chain ESS per dimension with Geyer's initial positive sequence."""
    x = np.asarray(chains, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    n, m, d = x.shape
    out = np.empty(d)
    for j in range(d):
        c = x[:, :, j] - x[:, :, j].mean(0)
        f = np.fft.rfft(c, 2 * n, axis=0)
        acov = np.fft.irfft(f * np.conj(f), axis=0)[:n] / n  # (n, m)
        W = (acov[0] * n / (n - 1)).mean()
        if W == 0:
            out[j] = n * m
            continue
        var_plus = (n - 1) / n * W + x[:, :, j].mean(0).var(ddof=1)
        rho = 1 - (W - acov.mean(1)) / var_plus
        s, t = 0.0, 1
        rho[0] = 1.0
        while t + 1 < n:
            pair = rho[t] + rho[t + 1]
            if pair < 0:
                break
            s += pair
            t += 2
        out[j] = n * m / (1 + 2 * s)
    return out


def _partners(C, rng):
    """Two distinct chain indices per chain, both different from it."""
    i = np.arange(C)
    a = rng.integers(0, C - 1, C)
    a = a + (a >= i)
    b = rng.integers(0, C - 2, C)
    lo, hi = np.minimum(i, a), np.maximum(i, a)
    b = b + (b >= lo)
    b = b + (b >= hi)
    return a, b


def dream_sample(log_density, config, init):
    """Run synchronized DREAM generations from ``init`` (n_chains x d).

    ``log_density`` maps an (m, d) array to m log densities. All proposals of a
    generation read the previous generation's states.
    """
    x = np.array(init, dtype=float)
    C, d = x.shape
    config.validate(d)
    if C != config.n_chains:
        raise ConfigError(f"init has {C} chains, config asks for {config.n_chains}")
    lp = np.asarray(log_density(x), dtype=float)
    if not np.isfinite(lp).all():
        raise InsufficientDataError("log density is not finite at every initial state")
    rng = np.random.default_rng(config.seed)
    start = int(math.floor(config.burn_in_fraction * config.n_iterations))
    keep = config.n_iterations - start
    samples = np.empty((keep, C, d))
    dens = np.empty((keep, C))
    accepted = 0
    for t in range(config.n_iterations):
        a, b = _partners(C, rng)
        mask = rng.random((C, d)) < config.crossover_prob
        none = ~mask.any(1)
        mask[none, rng.integers(0, d, none.sum())] = True
        dp = mask.sum(1)
        if config.unit_jump_every and (t + 1) % config.unit_jump_every == 0:
            gamma = np.ones(C)
        else:
            gamma = config.jump_scale / np.sqrt(2.0 * dp)
        e = rng.uniform(-config.jitter, config.jitter, (C, d))
        eps = rng.normal(0.0, config.noise, (C, d))
        step = (1 + e) * gamma[:, None] * (x[a] - x[b]) + eps
        prop = x + np.where(mask, step, 0.0)
        lq = np.asarray(log_density(prop), dtype=float)
        with np.errstate(invalid="ignore"):
            ok = np.log(rng.random(C)) < lq - lp
        x[ok], lp[ok] = prop[ok], lq[ok]
        if t >= start:
            samples[t - start], dens[t - start] = x, lp
            accepted += int(ok.sum())
    rate = accepted / (keep * C)
    if rate < 0.01:
        warnings.warn(f"DREAM acceptance rate {rate:.4f} after burn-in; chains stagnate",
                      stacklevel=2)
    return DreamResult(samples, dens, rate, gelman_rubin(samples),
                       effective_sample_size(samples))


# --------------------------------------------------------------------- priors

class Prior:
    """Mixture over groups of independent per-feature marginals.

    Sampler coordinates are latent: continuous features are themselves,
    binary features use the shared-threshold latent of ``Bernoulli``.
    """

    def __init__(self, names, components):
        self.names = list(names)
        self.components = [(float(w), list(ms)) for w, ms in components]
        total = sum(w for w, _ in self.components)
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ConfigError("prior component weights must sum to 1")
        for _, ms in self.components:
            if len(ms) != len(self.names):
                raise ConfigError("each prior component needs one marginal per feature")

    @classmethod
    def from_schema(cls, names, group="elevation", prevalence=0.282):
        """``group``: 'elevation', 'non_elevation', or 'cohort' (prevalence mixture)."""
        specs = [BY_NAME[n] for n in names]
        if group == "cohort":
            return cls(names, [(prevalence, [make_marginal(s, "elevation") for s in specs]),
                               (1 - prevalence,
                                [make_marginal(s, "non_elevation") for s in specs])])
        if group not in ("elevation", "non_elevation"):
            raise ConfigError(f"unknown prior group {group!r}")
        return cls(names, [(1.0, [make_marginal(s, group) for s in specs])])

    @property
    def dim(self):
        return len(self.names)

    def widen(self, factor):
        return Prior(self.names, [(w, [m.widen(factor) for m in ms])
                                  for w, ms in self.components])

    def logpdf(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        parts = []
        with np.errstate(divide="ignore", invalid="ignore"):
            for w, ms in self.components:
                lp = np.full(len(Z), math.log(w))
                for j, m in enumerate(ms):
                    lp = lp + m.logpdf(Z[:, j])
                parts.append(np.where(np.isnan(lp), -np.inf, lp))
        return logsumexp(np.vstack(parts), axis=0)

    def sample_latent(self, n, rng):
        weights = np.array([w for w, _ in self.components])
        comp = rng.choice(len(weights), n, p=weights)
        Z = np.empty((n, self.dim))
        for c, (_, ms) in enumerate(self.components):
            rows = np.flatnonzero(comp == c)
            for j, m in enumerate(ms):
                Z[rows, j] = m.sample_latent(len(rows), rng)
        return Z

    def to_features(self, Z):
        X = np.array(Z, dtype=float, copy=True)
        for j, m in enumerate(self.components[0][1]):
            if isinstance(m, Bernoulli):
                X[:, j] = m.from_latent(X[:, j])
        return X

    # Sampler coordinates: each latent is standardized with the first
    # component's marginal (log scale for lognormals) so differential-evolution
    # jumps see comparable scales; the Jacobian keeps the target density exact.

    def _coords(self):
        out = []
        for m in self.components[0][1]:
            if isinstance(m, LogNormal):
                out.append(("log", m.mu, m.sigma))
            elif isinstance(m, Bernoulli):
                out.append(("lin", 0.5, 0.5))
            else:
                out.append(("lin", m.mean, m.sd))
        return out

    def to_sampler(self, Z):
        U = np.array(Z, dtype=float, copy=True)
        for j, (kind, loc, scale) in enumerate(self._coords()):
            col = np.log(U[:, j]) if kind == "log" else U[:, j]
            U[:, j] = (col - loc) / scale
        return U

    def from_sampler(self, U):
        Z = np.array(U, dtype=float, copy=True)
        for j, (kind, loc, scale) in enumerate(self._coords()):
            col = loc + scale * Z[:, j]
            Z[:, j] = np.exp(col) if kind == "log" else col
        return Z

    def sampler_logpdf(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        jac = np.zeros(len(U))
        for j, (kind, loc, scale) in enumerate(self._coords()):
            jac += math.log(scale)
            if kind == "log":
                jac += loc + scale * U[:, j]
        with np.errstate(over="ignore"):
            return self.logpdf(self.from_sampler(U)) + jac

    def profile(self):
        """Prior mean feature vector (the default high-risk profile)."""
        return np.array([sum(w * ms[j].mean for w, ms in self.components)
                         for j in range(self.dim)])


# ------------------------------------------------------------ posterior risk

@dataclass
class PosteriorSummary:
    mean: float
    cri_low: float
    cri_high: float
    hist_edges: list
    hist_counts: list
    n_samples: int
    acceptance_rate: float
    rhat_max: float
    rhat_risk: float
    ess_min: float
    ess_risk: float
    rhat: dict = field(default_factory=dict)
    prior_group: str = ""

    def to_dict(self):
        return asdict(self)


def posterior_risk(model, prior, config=None, params=None, n_hist_bins=40, level=0.95,
                   prior_group=""):
    """Posterior predictive risk of ``model`` over feature vectors drawn from ``prior``.

    ``model`` is a TrainedModel or a callable on model-space rows; ``params``
    (PreprocessParams) maps clinical units to model space when given.
    Returns (PosteriorSummary, per-draw risks with shape (n_retained, n_chains)).
    """
    from .models import predict_proba

    config = config or SamplerConfig()
    width = getattr(model, "n_features", prior.dim)
    if width != prior.dim:
        raise ConfigError(f"prior has {prior.dim} dimensions, model expects {width}")
    if params is not None:
        params = params.restrict(prior.names)
    init = prior.sample_latent(config.n_chains, np.random.default_rng([config.seed, 7]))
    res = dream_sample(prior.sampler_logpdf, config, prior.to_sampler(init))
    draws = prior.to_features(prior.from_sampler(res.samples.reshape(-1, prior.dim)))
    rows = draws if params is None else scale_array(draws, params)
    f = model if callable(model) else (lambda Z: predict_proba(model, Z))
    risk = np.clip(np.asarray(f(rows), dtype=float), 0.0, 1.0)
    risk = risk.reshape(res.samples.shape[:2])
    flat = risk.ravel()
    alpha = round((1 - level) / 2, 12)  # 1 - 0.95 is not exactly 0.05
    lo, hi = np.quantile(flat, [alpha, 1 - alpha], method="inverted_cdf")
    counts, edges = np.histogram(flat, bins=n_hist_bins, range=(0.0, 1.0))
    rhat_risk = float(gelman_rubin(risk)[0])
    ess_risk = float(effective_sample_size(risk)[0])
    summary = PosteriorSummary(
        mean=float(flat.mean()), cri_low=float(lo), cri_high=float(hi),
        hist_edges=edges.tolist(), hist_counts=counts.tolist(), n_samples=int(flat.size),
        acceptance_rate=float(res.acceptance_rate), rhat_max=float(res.rhat.max()),
        rhat_risk=rhat_risk, ess_min=float(res.ess.min()), ess_risk=ess_risk,
        rhat=dict(zip(prior.names, map(float, res.rhat))), prior_group=prior_group)
    return summary, risk
