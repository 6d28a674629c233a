"""Data-augmentation Gibbs sampler for the multinomial probit second stage.

The model: latent utilities ``U_i ~ N(W_i beta, Sigma)`` relative to the
baseline alternative, observed choice = argmax of (0, U_i1, ..., U_iJ).  The
sampler alternates three conditional updates:

1. latent utilities, one coordinate at a time from its univariate conditional
   normal truncated to the region the observed choice implies (all
   observations are updated as one vectorized block per coordinate, which is
   the same Markov kernel because latent vectors are independent across
   observations given the parameters);
2. the coefficient vector from its Gaussian conditional (flat, proper, or
   dogmatic prior);
3. the latent error covariance from its conjugate Wishart update on the
   precision, followed by the identification rescaling ``Sigma <- Sigma/s11``
   with ``beta`` and the latents rescaled by ``1/sqrt(s11)`` in the same
   sweep, so every stored draw satisfies ``sigma_11 = 1`` exactly.

Draws of theta = (beta_tilde..., lambda, free Sigma entries) are stored after
burn-in with optional thinning.  Running twice with the same RandomStream
yields bitwise-identical draw matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._gibbs_kernels import (
    _argmax_consistent,
    _beta_step,
    _latent_sweep,
    _sigma_step,
)
from .datasets import MnpDataset
from .errors import NotPositiveDefinite
from .rng import RandomStream
from .stats import sample_truncated_normal

__all__ = [
    "PriorSpec",
    "GibbsConfig",
    "PosteriorDraws",
    "PosteriorSummary",
    "truncation_region",
    "gibbs_step_latents",
    "gibbs_step_beta",
    "gibbs_step_sigma",
    "run_gibbs",
    "summarize",
]


@dataclass
class PriorSpec:
    """Gaussian prior on the coefficients, Wishart prior on the precision.

    ``v_beta=None`` encodes the flat (non-informative) coefficient prior; an
    all-zero ``v_beta`` encodes the dogmatic prior concentrated at
    ``mu_beta``.  The precision prior is Wishart with ``wishart_dof`` degrees
    of freedom and scale matrix ``(wishart_dof * wishart_scale)^{-1}``, i.e.
    ``wishart_scale`` is the prior guess for the covariance itself.
    """

    mu_beta: np.ndarray
    v_beta: np.ndarray | None
    wishart_dof: float
    wishart_scale: np.ndarray

    def __post_init__(self):
        self.mu_beta = np.asarray(self.mu_beta, dtype=float)
        if self.v_beta is not None:
            self.v_beta = np.asarray(self.v_beta, dtype=float)
        self.wishart_scale = np.asarray(self.wishart_scale, dtype=float)
        if self.wishart_dof < self.wishart_scale.shape[0]:
            raise ValueError("wishart_dof must be >= the number of alternatives")

    @classmethod
    def default(cls, n_alternatives, n_coefficients) -> "PriorSpec":
        """Non-informative baseline: flat on beta, dof J+1, identity scale."""
        return cls(
            mu_beta=np.zeros(n_coefficients),
            v_beta=None,
            wishart_dof=float(n_alternatives + 1),
            wishart_scale=np.eye(n_alternatives),
        )


@dataclass
class GibbsConfig:
    """Chain length controls plus the owning random stream.

    ``fix_sigma`` freezes the latent error covariance at the given matrix
    (its (1,1) entry must be 1); the covariance step is then skipped and no
    covariance coordinates are stored.
    """

    rng: RandomStream
    burn_in: int = 2000
    keep: int = 2000
    thin: int = 1
    fix_sigma: np.ndarray | None = None

    def __post_init__(self):
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.keep < 1:
            raise ValueError("keep must be >= 1")
        if self.fix_sigma is not None:
            self.fix_sigma = np.asarray(self.fix_sigma, dtype=float)
            if self.fix_sigma[0, 0] != 1.0:
                raise ValueError("fix_sigma must satisfy the sigma_11 = 1 normalization")


@dataclass
class PosteriorDraws:
    """Stored Markov-chain draws plus light diagnostics."""

    draws: np.ndarray  # (keep, p_total)
    param_names: list
    diagnostics: dict = field(default_factory=dict)

    @property
    def keep(self):
        return self.draws.shape[0]


@dataclass
class PosteriorSummary:
    mean: np.ndarray
    cov: np.ndarray
    intervals: dict  # level -> (p, 2) array of equal-tailed endpoints
    mc_error: np.ndarray
    param_names: list

    @property
    def sd(self):
        return np.sqrt(np.diag(self.cov))


def truncation_region(choice, j, current_utilities):
    """Interval for alternative ``j``'s latent utility given the choice.

    ``j`` is 1-based (alternatives 1..J); ``current_utilities`` is the
    observation's current latent vector.  Holding the other utilities fixed,
    the observed choice stays the argmax exactly when the coordinate lies in
    the returned interval.
    """
    u = np.asarray(current_utilities, dtype=float)
    if choice == 0:
        return (-np.inf, 0.0)
    if choice == j:
        others = np.delete(u, j - 1)
        lower = max(0.0, others.max()) if others.size else 0.0
        return (lower, np.inf)
    return (-np.inf, float(u[choice - 1]))


def _conditional_coefs(sigma, j):
    J = sigma.shape[0]
    if J == 1:
        return np.empty(0), float(sigma[0, 0])
    others = [k for k in range(J) if k != j]
    c = np.linalg.solve(sigma[np.ix_(others, others)], sigma[others, j])
    tau2 = float(sigma[j, j] - sigma[j, others] @ c)
    return c, tau2


def gibbs_step_latents(utilities, dataset: MnpDataset, beta, sigma, rng: RandomStream):
    """One full sweep over latent-utility coordinates; updates in place.

    For each coordinate j (ascending), every observation's ``U_ij`` is drawn
    from its conditional normal given the other coordinates, truncated to
    :func:`truncation_region`.  After the sweep the latents reproduce the
    observed choices by construction.
    """
    ok = _latent_sweep(
        utilities,
        dataset.covariates,
        np.asarray(beta, dtype=float),
        np.asarray(sigma, dtype=float),
        dataset.choices,
        rng.gen,
    )
    if not ok:
        raise NotPositiveDefinite("latent error covariance is not positive definite")
    return utilities


def _implied_choices(utilities):
    best = utilities.max(axis=1)
    return np.where(best <= 0.0, 0, np.argmax(utilities, axis=1) + 1)


def gibbs_step_beta(latents, dataset: MnpDataset, prior: PriorSpec, sigma, rng: RandomStream):
    """Draw the coefficient vector from its Gaussian conditional.

    Precision ``V^{-1} = V_beta^{-1} + sum_i W_i' Sigma^{-1} W_i`` and mean
    ``V (V_beta^{-1} mu_beta + sum_i W_i' Sigma^{-1} U_i)``; the flat prior
    drops the prior terms and the dogmatic prior (v_beta = 0) returns
    ``mu_beta`` exactly.
    """
    p = dataset.covariates.shape[2]
    if prior.v_beta is not None and np.all(prior.v_beta == 0.0):
        return prior.mu_beta.copy()
    if prior.v_beta is None:
        prior_prec = np.zeros((p, p))
        prior_rhs = np.zeros(p)
    else:
        prior_prec = np.linalg.inv(prior.v_beta)
        prior_rhs = prior_prec @ prior.mu_beta
    beta_out = np.empty(p)
    ok = _beta_step(
        dataset.covariates,
        np.asarray(latents, dtype=float),
        np.linalg.inv(np.asarray(sigma, dtype=float)),
        prior_prec,
        prior_rhs,
        rng.gen,
        beta_out,
    )
    if not ok:
        raise NotPositiveDefinite("coefficient precision is singular (collinear regressors)")
    return beta_out


def gibbs_step_sigma(latents, dataset: MnpDataset, beta, prior: PriorSpec, rng: RandomStream):
    """Conjugate covariance update followed by the identification rescaling.

    Draws the precision from its Wishart conditional, inverts it, then
    rescales so the (1,1) element is exactly 1.  Returns ``(sigma, s11)``
    where ``s11`` is the pre-rescaling (1,1) element; the caller divides
    ``beta`` and the latents by ``sqrt(s11)`` in the same sweep.
    """
    J = dataset.covariates.shape[1]
    sigma_out = np.empty((J, J))
    s11 = _sigma_step(
        dataset.covariates,
        np.asarray(latents, dtype=float),
        np.asarray(beta, dtype=float),
        prior.wishart_dof + dataset.n,
        prior.wishart_dof * prior.wishart_scale,
        rng.gen,
        sigma_out,
    )
    if s11 <= 0.0:
        raise NotPositiveDefinite("covariance update produced a non-PD draw")
    return sigma_out, float(s11)


def _initial_latents(dataset: MnpDataset, sigma, rng: RandomStream):
    # cold start at beta = 0: chosen coordinate first, rivals below it
    n, J, _ = dataset.covariates.shape
    sd = np.sqrt(np.diag(sigma))
    U = np.zeros((n, J))
    choices = dataset.choices
    rows = np.arange(n)
    pos = choices > 0
    if np.any(pos):
        col = choices[pos] - 1
        U[rows[pos], col] = sample_truncated_normal(
            0.0, sd[col], np.zeros(int(pos.sum())), np.inf, rng
        )
    for j in range(J):
        free = pos & (choices != j + 1)
        if np.any(free):
            cap = U[rows[free], choices[free] - 1]
            U[free, j] = sample_truncated_normal(0.0, sd[j], -np.inf, cap, rng)
        base = ~pos
        if np.any(base):
            U[base, j] = sample_truncated_normal(
                0.0, sd[j], -np.inf, np.zeros(int(base.sum())), rng
            )
    return U


def _sigma_param_names(J):
    return [f"sigma_{r + 1}{c + 1}" for r in range(1, J) for c in range(r + 1)]


def _sigma_free_params(sigma):
    J = sigma.shape[0]
    return np.array([sigma[r, c] for r in range(1, J) for c in range(r + 1)])


def run_gibbs(dataset: MnpDataset, prior: PriorSpec, config: GibbsConfig) -> PosteriorDraws:
    """Run the sampler; burn-in discarded, every thin-th sweep stored.

    Deterministic given ``config.rng``.  Raises RuntimeError if a sweep ever
    leaves a latent vector inconsistent with its observed choice (internal
    bug guard; the truncation regions make this impossible by construction).
    """
    if config.keep < 100:
        warnings.warn("keep < 100 draws is too few for inferential use")
    n, J, p = dataset.covariates.shape
    rng = config.rng
    sigma = np.eye(J) if config.fix_sigma is None else config.fix_sigma.copy()
    beta = np.zeros(p)
    U = _initial_latents(dataset, sigma, rng)

    sample_sigma = config.fix_sigma is None and J > 1
    names = list(dataset.param_names) + (_sigma_param_names(J) if sample_sigma else [])
    out = np.empty((config.keep, len(names)))
    stored = 0
    total = config.burn_in + config.keep * config.thin
    for sweep in range(total):
        gibbs_step_latents(U, dataset, beta, sigma, rng)
        if not _argmax_consistent(U, dataset.choices):
            raise RuntimeError("latent utilities inconsistent with observed choices")
        beta = gibbs_step_beta(U, dataset, prior, sigma, rng)
        if sample_sigma:
            sigma, s11 = gibbs_step_sigma(U, dataset, beta, prior, rng)
            root = np.sqrt(s11)
            beta /= root
            U /= root
        k = sweep - config.burn_in
        if k >= 0 and (k + 1) % config.thin == 0:
            theta = np.concatenate([beta, _sigma_free_params(sigma)]) if sample_sigma else beta.copy()
            out[stored] = theta
            stored += 1
    diagnostics = {"argmax_consistent": True, "sweeps": total}
    return PosteriorDraws(out, names, diagnostics)


def _mc_error(draws, n_batches=20):
    keep = draws.shape[0]
    nb = min(n_batches, keep)
    edges = np.linspace(0, keep, nb + 1).astype(int)
    means = np.array([draws[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    if nb < 2:
        return np.full(draws.shape[1], np.nan)
    return means.std(axis=0, ddof=1) / np.sqrt(nb)


def summarize(draws: PosteriorDraws, levels=(0.90, 0.95, 0.99)) -> PosteriorSummary:
    """Mean, covariance and equal-tailed credible intervals of the draws.

    Interval endpoints are empirical quantiles with linear interpolation of
    order statistics (numpy's default rule); the same rule is reused by the
    bootstrap intervals so all methods are comparable.
    """
    X = draws.draws
    if X.shape[0] < 2:
        raise ValueError("need at least two stored draws to summarize")
    mean = X.mean(axis=0)
    cov = np.cov(X, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
    intervals = {}
    for level in levels:
        alpha = 1.0 - level
        lo = np.quantile(X, alpha / 2.0, axis=0)
        hi = np.quantile(X, 1.0 - alpha / 2.0, axis=0)
        intervals[level] = np.column_stack([lo, hi])
    return PosteriorSummary(mean, cov, intervals, _mc_error(X), list(draws.param_names))
