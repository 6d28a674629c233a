"""Core variate generation and normal-distribution special functions.

Everything downstream (Gibbs conditionals, GHK, the closed-form choice
probabilities) is built on the handful of primitives here: Cholesky with an
explicit positive-definiteness contract, multivariate/truncated normal and
Wishart samplers driven by an explicit :class:`~qbcf.rng.RandomStream`, and a
bivariate normal CDF accurate to well below 1e-7.

Truncated-normal switch-over rule
---------------------------------
After standardizing to bounds ``(a, b)``, draws use the inverse-CDF transform
while the interval touches ``(-4, 4)``.  Once the whole interval lies beyond
4 standard deviations (``a >= 4``, or the mirror case ``b <= -4``), the
inverse CDF runs out of resolution in the upper tail, so sampling switches to
accept/reject with Robert's shifted-exponential proposal at rate
``(a + sqrt(a^2 + 4)) / 2``; when the interval is so narrow that the
exponential proposal rarely lands inside it, a uniform proposal on ``(a, b)``
is used instead.  Both proposals have acceptance rates bounded away from
zero, so far-tail intervals such as (8, 9) sample without stalling.

Bivariate normal CDF
--------------------
``bvn_cdf`` integrates the conditional decomposition
``Phi2(u1, u2; rho) = int_{-inf}^{u1} phi(x) Phi((u2 - rho x)/sqrt(1-rho^2)) dx``
with a fixed 64-node Gauss-Legendre rule on [-8, u1].  Arguments beyond +-8
carry less than 1e-15 of probability and are clamped.  The arguments are
ordered canonically before integrating so that symmetry in (u1, u2) holds
bitwise.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidInterval, NotPositiveDefinite
from .rng import RandomStream

__all__ = [
    "cholesky",
    "sample_mvn",
    "sample_truncated_normal",
    "sample_wishart",
    "bvn_cdf",
    "norm_cdf",
]

#: standardized distance from the mean beyond which tail rejection is used
TAIL_SWITCH = 4.0

_SQRT_2PI = np.sqrt(2.0 * np.pi)

# fixed quadrature rule; 64 nodes give ~1e-15 worst-case error on [-8, 8]
_BVN_NODES = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_BVN_NODES)

norm_cdf = ndtr


def cholesky(m):
    """Lower-triangular factor L with L L^T = m.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is <= 0 (m is not positive definite).
    ValueError
        If m is not square-symmetric to 1e-12 relative tolerance.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def sample_mvn(mean, cov, rng: RandomStream):
    """One draw from N(mean, cov).

    Zero-variance coordinates are honored exactly: rows/columns of ``cov``
    whose diagonal entry is zero must vanish entirely, and the draw returns
    the corresponding ``mean`` entries unchanged.  An all-zero ``cov`` returns
    ``mean`` itself.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise ValueError("dimension mismatch between mean and cov")
    diag = np.diag(cov)
    if np.any(diag < 0.0):
        raise NotPositiveDefinite("negative variance on the diagonal")
    active = diag > 0.0
    x = mean.astype(float, copy=True)
    if not np.any(active):
        return x
    if np.any(cov[~active][:, active] != 0.0) or np.any(cov[active][:, ~active] != 0.0):
        raise NotPositiveDefinite("zero-variance coordinate with nonzero covariance")
    sub = cov[np.ix_(active, active)]
    L = cholesky(sub)
    x[active] += L @ rng.gen.standard_normal(int(active.sum()))
    return x


def _tail_std(a, b, gen):
    """Standard-normal draws restricted to (a, b) with a >= TAIL_SWITCH."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty_like(a)
    alpha = 0.5 * (a + np.sqrt(a * a + 4.0))
    # probability that the shifted-exponential proposal lands below b
    p_inside = -np.expm1(-alpha * np.minimum(b - a, 700.0 / alpha))
    use_exp = p_inside >= 0.1
    pending = np.ones(a.shape, dtype=bool)
    while np.any(pending):
        idx = np.flatnonzero(pending)
        ai, bi, ali = a[idx], b[idx], alpha[idx]
        ei = use_exp[idx]
        cand = np.empty(idx.size)
        accept_p = np.empty(idx.size)
        if np.any(ei):
            z = ai[ei] + gen.standard_exponential(int(ei.sum())) / ali[ei]
            cand[ei] = z
            accept_p[ei] = np.where(z < bi[ei], np.exp(-0.5 * (z - ali[ei]) ** 2), 0.0)
        if np.any(~ei):
            # narrow far-tail interval: uniform proposal, bounded density ratio
            z = ai[~ei] + gen.random(int((~ei).sum())) * (bi[~ei] - ai[~ei])
            cand[~ei] = z
            accept_p[~ei] = np.exp(-0.5 * (z * z - ai[~ei] ** 2))
        ok = gen.random(idx.size) <= accept_p
        out[idx[ok]] = cand[ok]
        pending[idx[ok]] = False
    return out


def _truncated_normal_core(mu, sigma, lower, upper, gen):
    # preconditions (sigma > 0, lower < upper, matching shapes) are the
    # caller's responsibility; the strict-inside guarantee is kept
    a = (lower - mu) / sigma
    b = (upper - mu) / sigma
    z = np.empty(a.shape, dtype=float)

    hi_tail = a >= TAIL_SWITCH
    lo_tail = b <= -TAIL_SWITCH
    mid = ~(hi_tail | lo_tail)
    if mid.all():
        pa = ndtr(a)
        pb = ndtr(b)
        z = ndtri(pa + gen.random(a.shape) * (pb - pa))
    else:
        if mid.any():
            pa = ndtr(a[mid])
            pb = ndtr(b[mid])
            z[mid] = ndtri(pa + gen.random(int(mid.sum())) * (pb - pa))
        if hi_tail.any():
            z[hi_tail] = _tail_std(a[hi_tail], b[hi_tail], gen)
        if lo_tail.any():
            z[lo_tail] = -_tail_std(-b[lo_tail], -a[lo_tail], gen)

    x = mu + sigma * z
    # hard guarantee: strictly inside the interval
    at_lo = x <= lower
    if at_lo.any():
        x[at_lo] = np.nextafter(lower[at_lo], np.inf)
    at_hi = x >= upper
    if at_hi.any():
        x[at_hi] = np.nextafter(upper[at_hi], -np.inf)
    return x


def sample_truncated_normal(mu, sigma, lower, upper, rng: RandomStream):
    """Draws from N(mu, sigma^2) restricted to the open interval (lower, upper).

    All four parameters broadcast; infinite bounds are allowed.  The returned
    values lie strictly inside their interval (a round-off hit on a bound is
    nudged one ulp inward).

    Raises
    ------
    InvalidInterval
        If any lower >= upper.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    scalar = mu.ndim == sigma.ndim == lower.ndim == upper.ndim == 0
    mu, sigma, lower, upper = np.broadcast_arrays(mu, sigma, lower, upper)
    if np.any(sigma <= 0.0):
        raise ValueError("sigma must be positive")
    if np.any(lower >= upper):
        raise InvalidInterval("lower bound must be strictly below upper bound")
    x = _truncated_normal_core(mu, sigma, lower, upper, rng.gen)
    return float(x) if scalar else x


def sample_wishart(dof, scale, rng: RandomStream):
    """One Wishart draw via the Bartlett decomposition; E[draw] = dof * scale.

    ``dof`` may be any real >= dim(scale).  The result is exactly symmetric
    and positive definite whenever ``scale`` is.
    """
    scale = np.asarray(scale, dtype=float)
    d = scale.shape[0]
    if dof < d:
        raise ValueError(f"dof={dof} must be >= dimension {d}")
    L = cholesky(scale)
    gen = rng.gen
    A = np.zeros((d, d))
    for i in range(d):
        A[i, i] = np.sqrt(gen.chisquare(dof - i))
    if d > 1:
        A[np.tril_indices(d, -1)] = gen.standard_normal(d * (d - 1) // 2)
    F = L @ A
    W = F @ F.T
    return 0.5 * (W + W.T)


def bvn_cdf(u1, u2, rho):
    """Standard bivariate normal CDF P(X <= u1, Y <= u2) at correlation rho.

    Accepts scalars or broadcasting arrays for ``u1``/``u2`` (``rho`` is a
    scalar with |rho| < 1).  Infinite arguments reduce exactly to the
    marginal CDF (or 0); finite arguments beyond +-8 are clamped.  Absolute
    accuracy is ~1e-15, far inside the 1e-7 contract.
    """
    rho = float(rho)
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie strictly inside (-1, 1)")
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    scalar = u1.ndim == 0 and u2.ndim == 0
    u1, u2 = np.broadcast_arrays(u1, u2)

    # canonical order makes the result exactly symmetric in (u1, u2)
    lo = np.minimum(u1, u2)
    hi = np.maximum(u1, u2)

    out = np.empty(lo.shape, dtype=float)
    neg_inf = np.isneginf(lo)
    pos_inf = np.isposinf(lo)  # both arguments +inf
    hi_inf = np.isposinf(hi) & ~neg_inf & ~pos_inf
    general = ~(neg_inf | pos_inf | hi_inf)

    out[neg_inf] = 0.0
    out[pos_inf] = 1.0
    if np.any(hi_inf):
        out[hi_inf] = ndtr(lo[hi_inf])
    if np.any(general):
        gl = np.clip(lo[general], -8.0, 8.0)
        gh = np.clip(hi[general], -8.0, 8.0)
        if rho == 0.0:
            out[general] = ndtr(gl) * ndtr(gh)
        else:
            s = np.sqrt(1.0 - rho * rho)
            half_len = 0.5 * (gl + 8.0)
            center = 0.5 * (gl - 8.0)
            x = half_len[..., None] * _GL_X + center[..., None]
            w = half_len[..., None] * _GL_W
            f = np.exp(-0.5 * x * x) / _SQRT_2PI * ndtr((gh[..., None] - rho * x) / s)
            out[general] = np.clip(np.sum(w * f, axis=-1), 0.0, 1.0)
    return float(out) if scalar else out
