"""Compiled inner kernels for the Gibbs sampler.

The latent-utility sweep draws n*J scalar truncated normals per sweep and
dominates the sampler's cost, so the sweep and the two conjugate parameter
updates are njit-compiled.  The public step functions in
:mod:`qbcf.mnp_gibbs` are thin wrappers over these kernels and the chain
runner calls the same kernels, so there is exactly one implementation.

The scalar truncated-normal draw follows the same switch-over rule as the
vectorized sampler in :mod:`qbcf.stats`: inverse CDF while the standardized
interval touches (-4, 4), Robert's shifted-exponential (or, for very narrow
far intervals, uniform) rejection beyond.  The normal quantile is Wichura's
PPND16 rational approximation (relative error ~1e-16); the uniform argument
is clamped to the representable CDF range so a zero-probability draw can
never return an infinity.

Kernels report failures (non-positive-definite updates) through status codes
because numba cannot raise package exception types; wrappers translate.
"""

import math

import numpy as np
from numba import njit

#: standardized distance beyond which tail rejection replaces the inverse CDF
TAIL_SWITCH = 4.0

_U_LO = 1e-300
_U_HI = 1.0 - 1.1e-16


@njit(cache=True)
def _ndtr(x):
    return 0.5 * math.erfc(-x * 0.7071067811865475244)


@njit(cache=True)
def _ndtri(p):
    # Wichura (1988), algorithm AS 241, PPND16
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
        x = num / den
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-6) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
        x = num / den
    if q < 0.0:
        return -x
    return x


@njit(cache=True)
def _tail_scalar(a, b, gen):
    # standard-normal draw from (a, b) with a >= TAIL_SWITCH
    alpha = 0.5 * (a + math.sqrt(a * a + 4.0))
    if b != np.inf and math.exp(-alpha * (b - a)) > 0.9:
        # narrow interval: uniform proposal, density ratio bounded at a
        while True:
            z = a + (b - a) * gen.random()
            if gen.random() <= math.exp(-0.5 * (z * z - a * a)):
                return z
    while True:
        z = a + gen.standard_exponential() / alpha
        if z < b and gen.random() <= math.exp(-0.5 * (z - alpha) * (z - alpha)):
            return z


@njit(cache=True)
def _trunc_std_scalar(a, b, gen):
    if a >= TAIL_SWITCH:
        return _tail_scalar(a, b, gen)
    if b <= -TAIL_SWITCH:
        return -_tail_scalar(-b, -a, gen)
    pa = _ndtr(a)
    pb = _ndtr(b)
    u = pa + gen.random() * (pb - pa)
    if u < _U_LO:
        u = _U_LO
    elif u > _U_HI:
        u = _U_HI
    return _ndtri(u)


@njit(cache=True)
def _chol_small(A, L):
    # lower Cholesky of A into L; returns False on a non-positive pivot
    d = A.shape[0]
    for i in range(d):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return False
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
        for j in range(i + 1, d):
            L[i, j] = 0.0
    return True


@njit(cache=True)
def _inv_spd_small(A, out):
    # inverse of symmetric positive definite A via Cholesky; False on failure
    d = A.shape[0]
    L = np.empty((d, d))
    if not _chol_small(A, L):
        return False
    # invert L in place (lower triangular)
    for i in range(d):
        L[i, i] = 1.0 / L[i, i]
        for j in range(i):
            s = 0.0
            for k in range(j, i):
                s += L[i, k] * L[k, j]
            L[i, j] = -s * L[i, i]
    # out = L^T L
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(max(i, j), d):
                s += L[k, i] * L[k, j]
            out[i, j] = s
    return True


@njit(cache=True)
def _conditional_setup(sigma, coefs, taus):
    # coefs[j, k]: weight of (U_k - mu_k) in coordinate j's conditional mean
    J = sigma.shape[0]
    if J == 1:
        taus[0] = math.sqrt(sigma[0, 0])
        return True
    sub = np.empty((J - 1, J - 1))
    subinv = np.empty((J - 1, J - 1))
    rhs = np.empty(J - 1)
    for j in range(J):
        row = 0
        for r in range(J):
            if r == j:
                continue
            col = 0
            for c in range(J):
                if c == j:
                    continue
                sub[row, col] = sigma[r, c]
                col += 1
            rhs[row] = sigma[r, j]
            row += 1
        if not _inv_spd_small(sub, subinv):
            return False
        tau2 = sigma[j, j]
        col = 0
        for k in range(J):
            if k == j:
                coefs[j, k] = 0.0
                continue
            s = 0.0
            for m in range(J - 1):
                s += subinv[col, m] * rhs[m]
            coefs[j, k] = s
            tau2 -= s * rhs[col]
            col += 1
        if tau2 <= 0.0:
            return False
        taus[j] = math.sqrt(tau2)
    return True


@njit(cache=True)
def _latent_sweep(U, W, beta, sigma, choices, gen):
    """One full sweep of latent-utility draws, coordinate j ascending.

    Returns False if the conditional covariance setup fails (non-PD sigma).
    """
    n, J, p = W.shape
    coefs = np.zeros((J, J))
    taus = np.empty(J)
    if not _conditional_setup(sigma, coefs, taus):
        return False
    for j in range(J):
        tau_j = taus[j]
        for i in range(n):
            # conditional mean given the other coordinates
            m = 0.0
            for q in range(p):
                m += W[i, j, q] * beta[q]
            for k in range(J):
                if k == j or coefs[j, k] == 0.0:
                    continue
                mu_k = 0.0
                for q in range(p):
                    mu_k += W[i, k, q] * beta[q]
                m += coefs[j, k] * (U[i, k] - mu_k)
            # truncation region implied by the observed choice
            c = choices[i]
            if c == 0:
                lo = -np.inf
                hi = 0.0
            elif c == j + 1:
                lo = 0.0
                for k in range(J):
                    if k != j and U[i, k] > lo:
                        lo = U[i, k]
                hi = np.inf
            else:
                lo = -np.inf
                hi = U[i, c - 1]
            a = (lo - m) / tau_j
            b = (hi - m) / tau_j
            x = m + tau_j * _trunc_std_scalar(a, b, gen)
            if x <= lo:
                x = np.nextafter(lo, np.inf)
            if x >= hi:
                x = np.nextafter(hi, -np.inf)
            U[i, j] = x
    return True


@njit(cache=True)
def _argmax_consistent(U, choices):
    n, J = U.shape
    for i in range(n):
        best = 0.0
        arg = 0
        for j in range(J):
            if U[i, j] > best:
                best = U[i, j]
                arg = j + 1
        if arg != choices[i]:
            return False
    return True


@njit(cache=True)
def _beta_step(W, U, sigma_inv, prior_prec, prior_rhs, gen, beta_out):
    """Gaussian conditional draw of beta; returns False on singular precision.

    ``prior_prec``/``prior_rhs`` are zero matrices/vectors under the flat
    prior.
    """
    n, J, p = W.shape
    prec = prior_prec.copy()
    rhs = prior_rhs.copy()
    for i in range(n):
        for j in range(J):
            t = 0.0
            for k in range(J):
                t += U[i, k] * sigma_inv[k, j]
            for q in range(p):
                rhs[q] += W[i, j, q] * t
            for jj in range(J):
                s = sigma_inv[j, jj]
                if s == 0.0:
                    continue
                for q in range(p):
                    wq = W[i, j, q] * s
                    for r in range(p):
                        prec[q, r] += wq * W[i, jj, r]
    # symmetrize against accumulation round-off
    for q in range(p):
        for r in range(q + 1, p):
            avg = 0.5 * (prec[q, r] + prec[r, q])
            prec[q, r] = avg
            prec[r, q] = avg
    L = np.empty((p, p))
    if not _chol_small(prec, L):
        return False
    # solve prec * m = rhs via the factor
    m = np.empty(p)
    for i in range(p):
        s = rhs[i]
        for k in range(i):
            s -= L[i, k] * m[k]
        m[i] = s / L[i, i]
    for i in range(p - 1, -1, -1):
        s = m[i]
        for k in range(i + 1, p):
            s -= L[k, i] * m[k]
        m[i] = s / L[i, i]
    # draw: m + L^{-T} z
    z = np.empty(p)
    for i in range(p):
        z[i] = gen.standard_normal()
    for i in range(p - 1, -1, -1):
        s = z[i]
        for k in range(i + 1, p):
            s -= L[k, i] * beta_out[k]
        beta_out[i] = s / L[i, i]
    for i in range(p):
        beta_out[i] += m[i]
    return True


@njit(cache=True)
def _bartlett_precision(dof, scale_chol, gen, out):
    # Wishart(dof, scale) draw via the Bartlett decomposition
    d = scale_chol.shape[0]
    A = np.zeros((d, d))
    for i in range(d):
        A[i, i] = math.sqrt(2.0 * gen.standard_gamma(0.5 * (dof - i)))
    for i in range(1, d):
        for j in range(i):
            A[i, j] = gen.standard_normal()
    F = scale_chol @ A
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += F[i, k] * F[j, k]
            out[i, j] = s


@njit(cache=True)
def _sigma_step(W, U, beta, dof_post, prior_term, gen, sigma_out):
    """Conjugate covariance draw, normalized to sigma_11 = 1.

    Returns the pre-normalization (1,1) element, or -1.0 on failure.
    """
    n, J, p = W.shape
    S = np.zeros((J, J))
    e = np.empty(J)
    for i in range(n):
        for j in range(J):
            m = 0.0
            for q in range(p):
                m += W[i, j, q] * beta[q]
            e[j] = U[i, j] - m
        for j in range(J):
            for k in range(J):
                S[j, k] += e[j] * e[k]
    A = prior_term + S
    scale_post = np.empty((J, J))
    if not _inv_spd_small(A, scale_post):
        return -1.0
    for j in range(J):
        for k in range(j + 1, J):
            avg = 0.5 * (scale_post[j, k] + scale_post[k, j])
            scale_post[j, k] = avg
            scale_post[k, j] = avg
    L = np.empty((J, J))
    if not _chol_small(scale_post, L):
        return -1.0
    precision = np.empty((J, J))
    _bartlett_precision(dof_post, L, gen, precision)
    sigma_raw = np.empty((J, J))
    if not _inv_spd_small(precision, sigma_raw):
        return -1.0
    s11 = sigma_raw[0, 0]
    if s11 <= 0.0:
        return -1.0
    for j in range(J):
        for k in range(J):
            sigma_out[j, k] = sigma_raw[j, k] / s11
    sigma_out[0, 0] = 1.0
    for j in range(J):
        for k in range(j + 1, J):
            avg = 0.5 * (sigma_out[j, k] + sigma_out[k, j])
            sigma_out[j, k] = avg
            sigma_out[k, j] = avg
    check = np.empty((J, J))
    if not _chol_small(sigma_out, check):
        return -1.0
    return s11
