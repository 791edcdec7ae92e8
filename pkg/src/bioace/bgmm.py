"""Two-component Bayesian Gaussian mixture over nugget similarity values.

The mixture separates "semantically similar" from "dissimilar" nugget pairs.
It is a one-dimensional Gaussian mixture with a Dirichlet prior on the
mixing weights and a Normal-Gamma prior on each component's (mean,
precision), fitted by coordinate-ascent variational inference (CAVI):

    pi              ~ Dirichlet(alpha0, ..., alpha0)
    lambda_k        ~ Gamma(a0, rate=b0)
    mu_k | lambda_k ~ Normal(m0, (beta0 * lambda_k)^-1)
    x_n | z_n = k   ~ Normal(mu_k, lambda_k^-1)

Priors are weakly informative and data-derived: alpha0 = 1/K, m0 = sample
mean, a0 = 1 with rate b0 = sample variance (so the prior mean precision is
1/variance), beta0 = 1. Responsibilities are initialised by a median split
with seed-controlled jitter, which deterministically separates the modes.

The evidence lower bound is computed in closed form each iteration; CAVI
guarantees it never decreases, and the fit enforces that (slack 1e-8) as a
self-check. When one component ends up with an effective sample fraction
below ``weight_floor`` the model is reported with a single component and
callers must fall back to raw-cosine alignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from .errors import DegenerateModel, TooFewSamples

_LOG_2PI = math.log(2.0 * math.pi)
_VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class BgmmConfig:
    max_iter: int = 500
    tol: float = 1e-6
    min_samples: int = 4
    weight_floor: float = 0.02
    init_jitter: float = 0.02
    seed: int = 0


@dataclass
class BgmmModel:
    """Fitted posterior. Arrays hold only the retained components.

    ``weights`` are posterior-mean mixing weights, ``means`` the posterior
    component means, and ``variances`` the inverse posterior-mean precisions
    (b_k / a_k). The hyperparameter arrays carry the full Normal-Gamma /
    Dirichlet posterior so the posterior predictive is exact.
    """

    n_components: int
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    weight_concentration: np.ndarray  # Dirichlet alpha_k
    mean_precision: np.ndarray  # beta_k
    precision_shape: np.ndarray  # a_k
    precision_rate: np.ndarray  # b_k
    elbo_trace: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def similar_component(self) -> int:
        return int(np.argmax(self.means))

    def responsibilities_at(self, values) -> np.ndarray:
        """Posterior-predictive responsibilities, shape (n, n_components).

        Each component's posterior predictive is a Student-t:
        df = 2 a_k, loc = m_k, scale^2 = b_k (beta_k + 1) / (a_k beta_k).
        """
        x = np.atleast_1d(np.asarray(values, dtype=float))
        df = 2.0 * self.precision_shape
        scale2 = (
            self.precision_rate
            * (self.mean_precision + 1.0)
            / (self.precision_shape * self.mean_precision)
        )
        z2 = (x[:, None] - self.means) ** 2 / scale2
        log_pdf = (
            gammaln((df + 1.0) / 2.0)
            - gammaln(df / 2.0)
            - 0.5 * np.log(df * np.pi * scale2)
            - (df + 1.0) / 2.0 * np.log1p(z2 / df)
        )
        log_post = np.log(self.weights) + log_pdf
        log_post -= logsumexp(log_post, axis=1, keepdims=True)
        return np.exp(log_post)

    def similar_probability(self, value) -> float:
        """Probability that ``value`` belongs to the high-similarity component."""
        if self.n_components < 2:
            raise DegenerateModel(
                "mixture collapsed to one component; use raw-cosine fallback"
            )
        resp = self.responsibilities_at([float(value)])
        return float(resp[0, self.similar_component])

    def similar_probabilities(self, values) -> np.ndarray:
        if self.n_components < 2:
            raise DegenerateModel(
                "mixture collapsed to one component; use raw-cosine fallback"
            )
        return self.responsibilities_at(values)[:, self.similar_component]


def _elbo(x, resp, priors, posts) -> float:
    """Closed-form evidence lower bound for the current q."""
    alpha0, beta0, m0, a0, b0 = priors
    alpha, beta, m, a, b = posts
    n, k = resp.shape

    nk = resp.sum(axis=0)
    safe_nk = np.maximum(nk, 1e-300)
    xbar = (resp * x[:, None]).sum(axis=0) / safe_nk
    sk = (resp * (x[:, None] - xbar) ** 2).sum(axis=0) / safe_nk

    e_ln_pi = digamma(alpha) - digamma(alpha.sum())
    e_ln_lambda = digamma(a) - np.log(b)
    e_lambda = a / b

    # E[ln p(X | Z, mu, lambda)]
    t1 = 0.5 * float(
        (
            nk
            * (
                e_ln_lambda
                - _LOG_2PI
                - 1.0 / beta
                - e_lambda * (sk + (xbar - m) ** 2)
            )
        ).sum()
    )
    # E[ln p(Z | pi)]
    t2 = float((nk * e_ln_pi).sum())
    # E[ln p(pi)]
    t3 = float(
        gammaln(k * alpha0) - k * gammaln(alpha0) + (alpha0 - 1.0) * e_ln_pi.sum()
    )
    # E[ln p(mu, lambda)]
    e_lambda_musq = e_lambda * (m - m0) ** 2 + 1.0 / beta
    t4 = float(
        (
            0.5 * (math.log(beta0) - _LOG_2PI + e_ln_lambda - beta0 * e_lambda_musq)
            + a0 * math.log(b0)
            - gammaln(a0)
            + (a0 - 1.0) * e_ln_lambda
            - b0 * e_lambda
        ).sum()
    )
    # E[ln q(Z)] with 0 ln 0 = 0
    t5 = float((resp * np.log(np.where(resp > 0, resp, 1.0))).sum())
    # E[ln q(pi)]
    t6 = float(
        ((alpha - 1.0) * e_ln_pi).sum() + gammaln(alpha.sum()) - gammaln(alpha).sum()
    )
    # E[ln q(mu, lambda)]; Gamma entropy H = a - ln b + ln G(a) + (1 - a) psi(a)
    gamma_entropy = a - np.log(b) + gammaln(a) + (1.0 - a) * digamma(a)
    t7 = float(
        (0.5 * e_ln_lambda + 0.5 * np.log(beta / (2.0 * math.pi)) - 0.5 - gamma_entropy).sum()
    )

    return t1 + t2 + t3 + t4 - t5 - t6 - t7


def fit_bgmm(samples, config: BgmmConfig = BgmmConfig()) -> BgmmModel:
    """Fit the mixture to a flat list of similarity values.

    Raises TooFewSamples below ``config.min_samples``; the caller must then
    use raw-cosine fallback alignment.
    """
    x = np.asarray(list(samples), dtype=float).ravel()
    n = x.size
    if n < config.min_samples:
        raise TooFewSamples(
            f"need at least {config.min_samples} similarity values, got {n}"
        )
    k = 2

    alpha0 = 1.0 / k
    beta0 = 1.0
    m0 = float(x.mean())
    a0 = 1.0
    b0 = max(float(x.var()), _VARIANCE_FLOOR)
    priors = (alpha0, beta0, m0, a0, b0)

    # Median split (component 1 = high side) with seeded jitter to break ties.
    rng = np.random.default_rng(config.seed)
    high = (x > np.median(x)).astype(float)
    jitter = rng.uniform(0.0, config.init_jitter, size=n)
    r_high = high * (1.0 - jitter) + (1.0 - high) * jitter
    resp = np.column_stack([1.0 - r_high, r_high])

    elbo_trace: list[float] = []
    converged = False
    posts = None
    for _ in range(config.max_iter):
        # M-step: update posterior hyperparameters from responsibilities.
        nk = resp.sum(axis=0)
        safe_nk = np.maximum(nk, 1e-300)
        xbar = (resp * x[:, None]).sum(axis=0) / safe_nk
        sk = (resp * (x[:, None] - xbar) ** 2).sum(axis=0) / safe_nk

        alpha = alpha0 + nk
        beta = beta0 + nk
        m = (beta0 * m0 + nk * xbar) / beta
        a = a0 + nk / 2.0
        b = b0 + 0.5 * (nk * sk + beta0 * nk / (beta0 + nk) * (xbar - m0) ** 2)
        posts = (alpha, beta, m, a, b)

        # E-step: refresh responsibilities from the new posterior.
        e_ln_pi = digamma(alpha) - digamma(alpha.sum())
        e_ln_lambda = digamma(a) - np.log(b)
        e_quad = 1.0 / beta + (a / b) * (x[:, None] - m) ** 2
        log_rho = e_ln_pi + 0.5 * e_ln_lambda - 0.5 * _LOG_2PI - 0.5 * e_quad
        log_rho -= logsumexp(log_rho, axis=1, keepdims=True)
        resp = np.exp(log_rho)

        elbo = _elbo(x, resp, priors, posts)
        if elbo_trace and elbo < elbo_trace[-1] - 1e-8:
            raise AssertionError(
                f"ELBO decreased: {elbo_trace[-1]} -> {elbo}; CAVI update is broken"
            )
        if elbo_trace and abs(elbo - elbo_trace[-1]) < config.tol:
            elbo_trace.append(elbo)
            converged = True
            break
        elbo_trace.append(elbo)

    alpha, beta, m, a, b = posts
    nk = resp.sum(axis=0)
    keep = np.arange(k)
    n_components = k
    if (nk / n).min() < config.weight_floor:
        keep = np.array([int(np.argmax(nk))])
        n_components = 1

    weights = alpha[keep] / alpha[keep].sum()
    return BgmmModel(
        n_components=n_components,
        weights=weights,
        means=m[keep].copy(),
        variances=(b[keep] / a[keep]).copy(),
        weight_concentration=alpha[keep].copy(),
        mean_precision=beta[keep].copy(),
        precision_shape=a[keep].copy(),
        precision_rate=b[keep].copy(),
        elbo_trace=elbo_trace,
        converged=converged,
    )


def similar_probability(model: BgmmModel, value: float) -> float:
    """Functional wrapper over BgmmModel.similar_probability."""
    return model.similar_probability(value)
