"""Univariate feature distributions parameterised by a target mean and SD.

Each family reproduces the requested mean/SD on its support, so group
statistics recovered from generated data match their calibration targets.
Bernoulli features are represented in the prior through a latent ``u`` on
[0, 1] with value ``u < 0.5`` and piecewise-constant density (2 rate below
one half, 2 (1 - rate) above). The threshold is shared by every rate, so
mixtures of groups stay well defined, every sampler coordinate is continuous,
and the pushed-forward marginal is exactly Bernoulli.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import optimize, stats


class Marginal:
    mean: float
    sd: float

    def sample(self, n, rng):
        raise NotImplementedError

    def logpdf(self, z):
        """Log density of the sampler coordinate (latent for Bernoulli)."""
        raise NotImplementedError

    def sample_latent(self, n, rng):
        return self.sample(n, rng)

    def from_latent(self, z):
        return z

    def widen(self, factor):
        raise NotImplementedError


class ClippedNormal(Marginal):
    """Gaussian clipped to [lower, upper]; as a prior, truncated there."""

    def __init__(self, mean, sd, lower=None, upper=None):
        self.mean, self.sd = float(mean), float(sd)
        self.lower = -np.inf if lower is None else float(lower)
        self.upper = np.inf if upper is None else float(upper)

    def sample(self, n, rng):
        return np.clip(rng.normal(self.mean, self.sd, n), self.lower, self.upper)

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        out = -0.5 * ((z - self.mean) / self.sd) ** 2 - math.log(self.sd * math.sqrt(2 * math.pi))
        return np.where((z >= self.lower) & (z <= self.upper), out, -np.inf)

    def widen(self, factor):
        return ClippedNormal(self.mean, self.sd * factor, self.lower, self.upper)


class LogNormal(Marginal):
    """Positive, right-skewed; log-scale parameters chosen to hit mean and SD exactly."""

    def __init__(self, mean, sd):
        self.mean, self.sd = float(mean), float(sd)
        s2 = math.log1p((self.sd / self.mean) ** 2)
        self.sigma = math.sqrt(s2)
        self.mu = math.log(self.mean) - s2 / 2

    def sample(self, n, rng):
        return np.exp(rng.normal(self.mu, self.sigma, n))

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lz = np.log(np.where(z > 0, z, 1.0))
            out = (-0.5 * ((lz - self.mu) / self.sigma) ** 2 - lz
                   - math.log(self.sigma * math.sqrt(2 * math.pi)))
        return np.where(z > 0, out, -np.inf)

    def widen(self, factor):
        return LogNormal(self.mean, self.sd * factor)


@lru_cache(maxsize=256)
def _truncnorm_params(mean, sd, lower, upper):
    """Parent-normal (mu, sigma) whose truncation to [lower, upper] has the given moments."""

    def resid(p):
        mu, log_s = p
        s = math.exp(log_s)
        a, b = (lower - mu) / s, (upper - mu) / s
        m, v = stats.truncnorm.stats(a, b, loc=mu, scale=s, moments="mv")
        return [(float(m) - mean) / sd, (math.sqrt(float(v)) - sd) / sd]

    sol = optimize.least_squares(resid, [mean, math.log(sd)], xtol=1e-14, ftol=1e-14,
                                 gtol=1e-14)
    if max(abs(r) for r in sol.fun) > 1e-8:
        raise ValueError(f"cannot match mean {mean} / sd {sd} on [{lower}, {upper}]")
    return float(sol.x[0]), math.exp(sol.x[1])


class TruncNormal(Marginal):
    def __init__(self, mean, sd, lower, upper):
        self.mean, self.sd = float(mean), float(sd)
        self.lower, self.upper = float(lower), float(upper)
        self.mu, self.sigma = _truncnorm_params(self.mean, self.sd, self.lower, self.upper)
        self._a = (self.lower - self.mu) / self.sigma
        self._b = (self.upper - self.mu) / self.sigma

    def sample(self, n, rng):
        return stats.truncnorm.rvs(self._a, self._b, loc=self.mu, scale=self.sigma,
                                   size=n, random_state=rng)

    def logpdf(self, z):
        return stats.truncnorm.logpdf(np.asarray(z, dtype=float), self._a, self._b,
                                      loc=self.mu, scale=self.sigma)

    def widen(self, factor):
        # widen the parent normal; the truncated SD grows but is bounded by the support
        out = object.__new__(TruncNormal)
        out.lower, out.upper = self.lower, self.upper
        out.mu, out.sigma = self.mu, self.sigma * factor
        out._a = (out.lower - out.mu) / out.sigma
        out._b = (out.upper - out.mu) / out.sigma
        m, v = stats.truncnorm.stats(out._a, out._b, loc=out.mu, scale=out.sigma,
                                     moments="mv")
        out.mean, out.sd = float(m), math.sqrt(float(v))
        return out


class Bernoulli(Marginal):
    def __init__(self, rate):
        self.rate = float(rate)
        self.mean = self.rate
        self.sd = math.sqrt(self.rate * (1 - self.rate))

    def sample(self, n, rng):
        return (rng.random(n) < self.rate).astype(float)

    def sample_latent(self, n, rng):
        x = rng.random(n) < self.rate
        return 0.5 * rng.random(n) + np.where(x, 0.0, 0.5)

    def from_latent(self, z):
        return (np.asarray(z) < 0.5).astype(float)

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            lo, hi = math.log(2 * self.rate) if self.rate > 0 else -np.inf, \
                math.log(2 * (1 - self.rate)) if self.rate < 1 else -np.inf
        return np.where((z >= 0) & (z <= 1), np.where(z < 0.5, lo, hi), -np.inf)

    def widen(self, factor):
        return Bernoulli(self.rate)


def make_marginal(spec, group):
    """Marginal for a schema FeatureSpec; ``group`` is 'elevation' or 'non_elevation'."""
    mean, sd = getattr(spec, group)
    if spec.dist == "bernoulli":
        return Bernoulli(mean)
    if spec.dist == "lognormal":
        return LogNormal(mean, sd)
    if spec.dist == "truncnormal":
        return TruncNormal(mean, sd, spec.lower, spec.upper)
    return ClippedNormal(mean, sd, spec.lower, spec.upper)
