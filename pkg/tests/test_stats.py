import numpy as np
import pytest
from scipy import integrate
from scipy.special import ndtr

from qbcf import (
    RandomStream,
    bvn_cdf,
    cholesky,
    sample_mvn,
    sample_truncated_normal,
    sample_wishart,
)
from qbcf.errors import InvalidInterval, NotPositiveDefinite
from qbcf.stats import _tail_std


# ---------------------------------------------------------------- cholesky
def test_cholesky_identity():
    assert np.array_equal(cholesky(np.eye(2)), np.eye(2))


def test_cholesky_hand_example():
    L = cholesky([[4.0, 2.0], [2.0, 5.0]])
    assert np.allclose(L, [[2.0, 0.0], [1.0, 2.0]])
    assert np.allclose(L @ L.T, [[4.0, 2.0], [2.0, 5.0]])


def test_cholesky_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        cholesky([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky([[1.0, 0.5], [0.2, 1.0]])


def test_cholesky_reconstruction_error():
    gen = RandomStream(3).gen
    for _ in range(20):
        A = gen.standard_normal((4, 4))
        m = A @ A.T + 4 * np.eye(4)
        L = cholesky(m)
        assert np.max(np.abs(L @ L.T - m)) <= 1e-10 * np.max(np.abs(m))


# ---------------------------------------------------------------- sample_mvn
def test_mvn_zero_cov_returns_mean_exactly():
    mean = np.array([0.3, -1.7, 2.0])
    x = sample_mvn(mean, np.zeros((3, 3)), RandomStream(0))
    assert np.array_equal(x, mean)


def test_mvn_zero_variance_coordinate_is_exact():
    rng = RandomStream(11)
    for _ in range(50):
        x = sample_mvn([1.0, 2.0], np.diag([0.0, 1.0]), rng)
        assert x[0] == 1.0


def test_mvn_moments_standard_normal():
    rng = RandomStream(21)
    draws = np.array([sample_mvn(np.zeros(2), np.eye(2), rng) for _ in range(10**5)])
    se = 1.0 / np.sqrt(10**5)
    assert np.max(np.abs(draws.mean(axis=0))) < 4 * se
    assert np.all(draws.var(axis=0) > 0.98)
    assert np.all(draws.var(axis=0) < 1.02)


def test_mvn_propagates_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        sample_mvn(np.zeros(2), [[1.0, 2.0], [2.0, 1.0]], RandomStream(0))
    with pytest.raises(NotPositiveDefinite):
        # zero diagonal entry with nonzero covariance is not PSD
        sample_mvn(np.zeros(2), [[0.0, 0.5], [0.5, 1.0]], RandomStream(0))


# ------------------------------------------------- sample_truncated_normal
def test_truncnorm_positive_half_line_mean():
    x = sample_truncated_normal(0.0, 1.0, np.zeros(10**5), np.inf, RandomStream(5))
    assert abs(x.mean() - np.sqrt(2.0 / np.pi)) < 0.01


def test_truncnorm_untruncated_reduction():
    x = sample_truncated_normal(0.0, 1.0, np.full(10**5, -np.inf), np.inf, RandomStream(6))
    assert abs(x.mean()) < 0.013


def test_truncnorm_far_tail_interval():
    x = sample_truncated_normal(0.0, 1.0, np.full(5000, 8.0), 9.0, RandomStream(7))
    assert np.all(x > 8.0)
    assert np.all(x < 9.0)


def test_truncnorm_tail_scheme_against_brute_force():
    # validate the tail sampler at a threshold where plain rejection works
    a, b = 2.0, 2.5
    tail = _tail_std(np.full(2 * 10**5, a), np.full(2 * 10**5, b), RandomStream(8).gen)
    raw = RandomStream(9).gen.standard_normal(4 * 10**6)
    brute = raw[(raw > a) & (raw < b)]
    phi = lambda t: np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi)
    true_mean = (phi(a) - phi(b)) / (ndtr(b) - ndtr(a))
    assert abs(tail.mean() - true_mean) < 4 * tail.std() / np.sqrt(tail.size)
    assert abs(brute.mean() - tail.mean()) < 4 * brute.std() / np.sqrt(brute.size)


def test_truncnorm_strictly_inside_many_regimes():
    rng = RandomStream(10)
    gen = RandomStream(11).gen
    for _ in range(200):
        lo = gen.uniform(-6, 6)
        hi = lo + gen.uniform(1e-3, 4)
        x = sample_truncated_normal(gen.uniform(-2, 2), gen.uniform(0.1, 3), lo, hi, rng)
        assert lo < x < hi


def test_truncnorm_invalid_interval():
    with pytest.raises(InvalidInterval):
        sample_truncated_normal(0.0, 1.0, 1.0, 1.0, RandomStream(0))
    with pytest.raises(InvalidInterval):
        sample_truncated_normal(0.0, 1.0, 2.0, -2.0, RandomStream(0))


def test_truncnorm_location_scale():
    x = sample_truncated_normal(3.0, 2.0, np.full(10**5, 3.0), np.inf, RandomStream(12))
    assert abs(x.mean() - (3.0 + 2.0 * np.sqrt(2.0 / np.pi))) < 0.03


# ------------------------------------------------------------ sample_wishart
def test_wishart_scalar_chi_square_mean():
    k = 7.0
    rng = RandomStream(13)
    draws = np.array([sample_wishart(k, [[1.0]], rng)[0, 0] for _ in range(10**5)])
    assert abs(draws.mean() - k) < 4 * np.sqrt(2 * k / 10**5)


def test_wishart_mean_identity_dim2():
    rng = RandomStream(14)
    acc = np.zeros((2, 2))
    n = 10**5
    for _ in range(n):
        acc += sample_wishart(5.0, np.eye(2), rng)
    mean = acc / n
    assert np.all(np.abs(mean - 5.0 * np.eye(2)) <= 0.02 * 5.0)


def test_wishart_draws_symmetric_positive_definite():
    rng = RandomStream(15)
    for c in (0.5, 1.0, 3.0):
        for _ in range(50):
            W = sample_wishart(4.0, c * np.eye(3), rng)
            assert np.array_equal(W, W.T)
            assert np.all(np.linalg.eigvalsh(W) > 0)


def test_wishart_rejects_low_dof():
    with pytest.raises(ValueError):
        sample_wishart(1.5, np.eye(2), RandomStream(0))


# ------------------------------------------------------------------ bvn_cdf
def test_bvn_independence_quadrant():
    assert bvn_cdf(0.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-12)


def test_bvn_quadrant_formula():
    # closed form for P(X<=0, Y<=0): 1/4 + arcsin(rho) / (2 pi)
    for rho in (-0.9, -0.3, 1 / np.sqrt(2), 0.5, 0.95):
        target = 0.25 + np.arcsin(rho) / (2 * np.pi)
        assert bvn_cdf(0.0, 0.0, rho) == pytest.approx(target, abs=1e-10)


def test_bvn_marginal_reduction():
    assert bvn_cdf(np.inf, 0.0, 0.3) == pytest.approx(0.5, abs=1e-12)
    for u in (-2.0, -0.3, 1.1, 4.0):
        for rho in (-0.8, 0.0, 0.6):
            assert bvn_cdf(u, np.inf, rho) == pytest.approx(ndtr(u), abs=1e-7)
    assert bvn_cdf(-np.inf, 1.0, 0.5) == 0.0


def test_bvn_symmetry_exact():
    gen = RandomStream(16).gen
    for _ in range(200):
        u1, u2 = gen.uniform(-5, 5, 2)
        rho = gen.uniform(-0.98, 0.98)
        assert bvn_cdf(u1, u2, rho) == bvn_cdf(u2, u1, rho)


def _bvn_reference(u1, u2, rho):
    # independent oracle: adaptive quadrature of the conditional decomposition
    s = np.sqrt(1.0 - rho * rho)
    f = lambda x: np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi) * ndtr((u2 - rho * x) / s)
    val, _ = integrate.quad(f, -9.0, u1, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def test_bvn_accuracy_against_adaptive_quadrature():
    gen = RandomStream(17).gen
    for _ in range(60):
        u1, u2 = gen.uniform(-6, 6, 2)
        rho = gen.uniform(-0.97, 0.97)
        assert bvn_cdf(u1, u2, rho) == pytest.approx(_bvn_reference(u1, u2, rho), abs=1e-7)


def test_bvn_monotone_in_each_argument():
    grid = np.linspace(-4, 4, 33)
    for rho in (-0.7, 0.2, 0.9):
        vals_u1 = bvn_cdf(grid, 0.7, rho)
        vals_u2 = bvn_cdf(-0.4, grid, rho)
        assert np.all(np.diff(vals_u1) >= 0)
        assert np.all(np.diff(vals_u2) >= 0)


def test_bvn_vectorized_matches_scalar():
    u1 = np.array([-1.0, 0.2, 3.0])
    u2 = np.array([0.5, -0.7, 1.0])
    vec = bvn_cdf(u1, u2, 0.4)
    for i in range(3):
        assert vec[i] == bvn_cdf(u1[i], u2[i], 0.4)


def test_bvn_rejects_degenerate_rho():
    with pytest.raises(ValueError):
        bvn_cdf(0.0, 0.0, 1.0)


# --------------------------------------------------------- reproducibility
def test_samplers_bitwise_reproducible():
    def draw_all(seed):
        rng = RandomStream(seed, 1)
        return (
            sample_mvn(np.zeros(3), np.eye(3) + 0.3, rng),
            sample_truncated_normal(0.0, 1.0, np.zeros(10), np.inf, rng),
            sample_wishart(6.0, np.eye(2), rng),
        )

    a = draw_all(77)
    b = draw_all(77)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
