"""Multinomial-probit choice probabilities and a likelihood point estimator.

Two independent evaluation routes for the conditional choice probabilities:

* a closed form for the three-alternative model (baseline plus two), exact up
  to bivariate-normal CDF accuracy.  With utilities ``u_j = W_j' theta`` and
  latent error covariance ``[[1, s12], [s12, s2^2]]``,

  ``P(C=0) = Phi2(-u1, -u2/s2; s12/s2)``
  ``P(C=1) = Phi2((u1-u2)/d, u1; (1-s12)/d)``
  ``P(C=2) = Phi2((u2-u1)/d, u2/s2; (s2^2-s12)/(s2 d))``,  d = sqrt(1+s2^2-2 s12).

  Only the fully-normalized case ``s2 = 1, s12 = 0`` is exercised by the
  estimation pipeline; the general form is wired for completeness and checked
  through the sum-to-one identity.

* the GHK recursive importance sampler for any number of alternatives: each
  alternative's choice event is an orthant of a linearly transformed latent
  vector, and the recursion samples truncated standard normals along the
  Cholesky directions.

``two_stage_mle_3alt`` maximizes the closed-form likelihood with Nelder-Mead
and serves as the frequentist benchmark the quasi-posterior mean must
reproduce to first order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr, ndtri

from .datasets import MnpDataset
from .errors import MaxIterationsExceeded
from .rng import RandomStream
from .stats import bvn_cdf, cholesky

__all__ = [
    "ThetaParams",
    "MleResult",
    "choice_probs_3alt",
    "choice_probs_ghk",
    "log_likelihood",
    "two_stage_mle_3alt",
]

#: probabilities are floored here before taking logs
PROB_FLOOR = 1e-12


@dataclass
class ThetaParams:
    """Second-stage parameters: coefficients plus the normalized covariance."""

    beta_tilde: np.ndarray
    lam: float
    sigma: np.ndarray

    def __post_init__(self):
        self.beta_tilde = np.atleast_1d(np.asarray(self.beta_tilde, dtype=float))
        self.lam = float(self.lam)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.sigma[0, 0] != 1.0:
            raise ValueError("sigma must carry the sigma_11 = 1 normalization")
        cholesky(self.sigma)  # must be positive definite

    @property
    def coefficients(self):
        """Stacked (beta_tilde..., lambda) vector multiplying W rows."""
        return np.concatenate([self.beta_tilde, [self.lam]])

    @classmethod
    def identity_sigma(cls, beta_tilde, lam, n_alternatives=2) -> "ThetaParams":
        return cls(beta_tilde, lam, np.eye(n_alternatives))


def choice_probs_3alt(theta: ThetaParams, w1, w2):
    """Closed-form (P(C=0), P(C=1), P(C=2)) for the three-alternative model.

    ``w1``/``w2`` are covariate rows (p,) or batches (n, p).  Components sum
    to one up to bivariate-CDF accuracy (< 1e-10).
    """
    if theta.sigma.shape != (2, 2):
        raise ValueError("closed form requires exactly two non-baseline alternatives")
    coef = theta.coefficients
    u1 = np.asarray(w1, dtype=float) @ coef
    u2 = np.asarray(w2, dtype=float) @ coef
    s2 = float(np.sqrt(theta.sigma[1, 1]))
    s12 = float(theta.sigma[0, 1])
    d = np.sqrt(1.0 + s2 * s2 - 2.0 * s12)
    p0 = bvn_cdf(-u1, -u2 / s2, s12 / s2)
    p1 = bvn_cdf((u1 - u2) / d, u1, (1.0 - s12) / d)
    p2 = bvn_cdf((u2 - u1) / d, u2 / s2, (s2 * s2 - s12) / (s2 * d))
    return np.stack([p0, p1, p2], axis=-1)


def _ghk_orthant(mean, cov, m, gen):
    """GHK estimate of P(Y <= 0) for Y ~ N(mean, cov) from m draws."""
    L = cholesky(cov)
    J = mean.shape[0]
    u = gen.random((m, J))
    prob = np.ones(m)
    eta = np.zeros((m, J))
    for k in range(J):
        shift = eta[:, :k] @ L[k, :k] if k else 0.0
        upper = -(mean[k] + shift) / L[k, k]
        p_k = ndtr(upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            draw = ndtri(np.clip(u[:, k] * p_k, 1e-300, 1.0 - 1e-16))
        # dead paths (p_k underflowed) already contribute zero probability
        eta[:, k] = np.where(p_k > 0.0, draw, upper)
        prob *= p_k
    return float(prob.mean())


def _choice_transform(c, mu, sigma):
    # rewrite {C = c} as an orthant event of a transformed latent vector
    J = mu.shape[0]
    if c == 0:
        return mu, sigma
    cc = c - 1
    A = np.zeros((J, J))
    row = 0
    for k in range(J):
        if k == cc:
            continue
        A[row, k] = 1.0
        A[row, cc] = -1.0
        row += 1
    A[J - 1, cc] = -1.0
    return A @ mu, A @ sigma @ A.T


def choice_probs_ghk(theta: ThetaParams, W_i, m, rng: RandomStream):
    """GHK probabilities over alternatives {0..J} for one observation.

    Parameters
    ----------
    W_i : (J, p) covariate rows of the observation.
    m : number of importance-sampling draws per alternative (>= 100).

    Returns
    -------
    (probs, raw_sum) : renormalized probability vector over {0..J} and the
    pre-normalization sum (a simulation-quality diagnostic; it approaches 1
    as m grows).
    """
    if m < 100:
        raise ValueError("GHK needs at least 100 draws")
    W_i = np.asarray(W_i, dtype=float)
    mu = W_i @ theta.coefficients
    J = mu.shape[0]
    gen = rng.gen
    raw = np.empty(J + 1)
    for c in range(J + 1):
        mean_t, cov_t = _choice_transform(c, mu, theta.sigma)
        raw[c] = _ghk_orthant(mean_t, cov_t, m, gen)
    raw_sum = float(raw.sum())
    if raw_sum <= 0.0:
        return np.full(J + 1, 1.0 / (J + 1)), raw_sum
    return raw / raw_sum, raw_sum


def log_likelihood(dataset: MnpDataset, theta: ThetaParams, engine="closed_form",
                   m=2000, rng: RandomStream | None = None):
    """Sum of log choice probabilities, floored at 1e-12 before logging.

    ``engine="closed_form"`` uses the three-alternative formulas (J must be
    2); ``engine="ghk"`` works for any J and draws its simulator noise from
    per-observation substreams of ``rng``, making the value deterministic
    and independent of evaluation order.
    """
    W = dataset.covariates
    if engine == "closed_form":
        P = choice_probs_3alt(theta, W[:, 0, :], W[:, 1, :])
        picked = P[np.arange(dataset.n), dataset.choices]
    elif engine == "ghk":
        if rng is None:
            raise ValueError("GHK engine needs a RandomStream")
        picked = np.empty(dataset.n)
        for i in range(dataset.n):
            probs, _ = choice_probs_ghk(theta, W[i], m, rng.substream(i))
            picked[i] = probs[dataset.choices[i]]
    else:
        raise ValueError(f"unknown probability engine {engine!r}")
    return float(np.sum(np.log(np.maximum(picked, PROB_FLOOR))))


@dataclass
class MleResult:
    theta: ThetaParams
    log_lik: float
    n_iter: int
    converged: bool


def two_stage_mle_3alt(dataset: MnpDataset, start: ThetaParams, maxiter=5000) -> MleResult:
    """Nelder-Mead maximizer of the closed-form likelihood (Sigma fixed at I).

    Convergence: simplex diameter below 1e-6 in parameter space.  Raises
    :class:`MaxIterationsExceeded` (carrying the best point found) once
    ``maxiter`` iterations are exhausted.
    """
    if dataset.n_alternatives != 2:
        raise ValueError("the closed-form likelihood covers J = 2 only")
    eye = np.eye(2)

    def neg_ll(x):
        th = ThetaParams(x[:-1], x[-1], eye)
        return -log_likelihood(dataset, th, engine="closed_form")

    x0 = start.coefficients
    res = minimize(
        neg_ll,
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": maxiter, "maxfev": 3 * maxiter},
    )
    theta = ThetaParams(res.x[:-1], res.x[-1], eye)
    if not res.success:
        raise MaxIterationsExceeded(res.message, best=MleResult(theta, -res.fun, res.nit, False))
    return MleResult(theta, -res.fun, res.nit, True)
