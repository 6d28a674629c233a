import numpy as np
import pytest
from scipy.special import ndtr

from qbcf.datasets import MnpDataset
from qbcf.errors import MaxIterationsExceeded
from qbcf.mnp_probs import (
    ThetaParams,
    choice_probs_3alt,
    choice_probs_ghk,
    log_likelihood,
    two_stage_mle_3alt,
)
from qbcf.rng import RandomStream

from conftest import synth_mnp


def theta_eye(beta=1.0, lam=0.6):
    return ThetaParams([beta], lam, np.eye(2))


# --------------------------------------------------------- closed form (J=2)
def test_zero_utilities_quadrant_split():
    p = choice_probs_3alt(theta_eye(), np.zeros(2), np.zeros(2))
    target1 = 0.25 + np.arcsin(1.0 / np.sqrt(2.0)) / (2 * np.pi)  # = 0.375
    assert p[0] == pytest.approx(0.25, abs=1e-9)
    assert p[1] == pytest.approx(target1, abs=1e-9)
    assert p[2] == pytest.approx(target1, abs=1e-9)


def test_dominant_alternative_limit():
    # huge utility for alternative 1 wipes out the baseline
    p = choice_probs_3alt(theta_eye(), np.array([30.0, 0.0]), np.array([0.1, -0.2]))
    assert p[0] == pytest.approx(0.0, abs=1e-9)
    assert p[1] == pytest.approx(1.0, abs=1e-7)


def test_probabilities_sum_to_one():
    gen = RandomStream(1).gen
    th = theta_eye()
    for _ in range(50):
        w1, w2 = gen.uniform(-3, 3, (2, 2))
        p = choice_probs_3alt(th, w1, w2)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-10


def test_general_sigma_sum_to_one():
    # the general (s2, s12) wiring is held to the law of total probability
    gen = RandomStream(2).gen
    th = ThetaParams([0.8], -0.3, np.array([[1.0, 0.4], [0.4, 1.5]]))
    for _ in range(50):
        w1, w2 = gen.uniform(-3, 3, (2, 2))
        p = choice_probs_3alt(th, w1, w2)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-10


def test_batched_matches_scalar():
    gen = RandomStream(3).gen
    th = theta_eye()
    w1 = gen.standard_normal((7, 2))
    w2 = gen.standard_normal((7, 2))
    batch = choice_probs_3alt(th, w1, w2)
    for i in range(7):
        assert np.array_equal(batch[i], choice_probs_3alt(th, w1[i], w2[i]))


def test_translation_against_brute_force_mc():
    th = theta_eye()
    w1 = np.array([0.4, 0.1])
    w2 = np.array([-0.3, 0.5])
    shift = np.array([0.7, 0.7])  # adds a constant to both utilities
    gen = RandomStream(4).gen
    m = 10**6
    e = gen.standard_normal((m, 2))
    for ww1, ww2 in ((w1, w2), (w1 + shift, w2 + shift)):
        u1 = ww1 @ th.coefficients + e[:, 0]
        u2 = ww2 @ th.coefficients + e[:, 1]
        mc = np.array(
            [
                np.mean((u1 <= 0) & (u2 <= 0)),
                np.mean((u1 > 0) & (u1 >= u2)),
                np.mean((u2 > 0) & (u2 > u1)),
            ]
        )
        assert np.max(np.abs(choice_probs_3alt(th, ww1, ww2) - mc)) < 0.005


def test_theta_params_validation():
    with pytest.raises(ValueError):
        ThetaParams([1.0], 0.0, np.array([[2.0, 0.0], [0.0, 1.0]]))  # sigma_11 != 1


# ------------------------------------------------------------------------ GHK
def test_ghk_matches_closed_form():
    th = theta_eye()
    gen = RandomStream(5).gen
    for k in range(5):
        W = gen.uniform(-2, 2, (2, 2))
        cf = choice_probs_3alt(th, W[0], W[1])
        g, raw_sum = choice_probs_ghk(th, W, 10**4, RandomStream(100 + k))
        assert np.max(np.abs(g - cf)) < 0.005
        assert abs(raw_sum - 1.0) < 0.05
        assert g.sum() == pytest.approx(1.0, abs=1e-12)


def test_ghk_binary_probit():
    th = ThetaParams([0.7], -0.4, np.eye(1))
    w = np.array([[0.5, 0.8]])
    g, _ = choice_probs_ghk(th, w, 10**4, RandomStream(6))
    assert g[1] == pytest.approx(ndtr(w[0] @ th.coefficients), abs=0.01)


def test_ghk_deterministic():
    th = theta_eye()
    W = np.array([[0.2, -0.1], [0.4, 0.3]])
    a = choice_probs_ghk(th, W, 500, RandomStream(7))
    b = choice_probs_ghk(th, W, 500, RandomStream(7))
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_ghk_error_scaling_with_draws():
    th = theta_eye()
    W = np.array([[0.3, 0.2], [-0.4, 0.6]])
    est = {}
    for m in (400, 10**4):
        est[m] = np.array(
            [choice_probs_ghk(th, W, m, RandomStream(8, r))[0][0] for r in range(50)]
        )
    ratio = est[400].std() / est[10**4].std()
    assert 3.5 <= ratio <= 7.0  # ~ sqrt(10000/400) = 5


# -------------------------------------------------------------- log-likelihood
def test_single_observation_uniform_probabilities():
    ds = MnpDataset(np.array([0]), np.zeros((1, 2, 2)))
    th = theta_eye()
    assert log_likelihood(ds, th) == pytest.approx(np.log(0.25), abs=1e-10)


def test_doubling_dataset_doubles_loglik():
    ds, coef, _ = synth_mnp(9, 60)
    th = ThetaParams(coef[:-1], coef[-1], np.eye(2))
    ll = log_likelihood(ds, th)
    ds2 = MnpDataset(np.tile(ds.choices, 2), np.tile(ds.covariates, (2, 1, 1)))
    assert log_likelihood(ds2, th) == pytest.approx(2.0 * ll, rel=1e-12)


def test_loglik_prefers_truth_over_shifted():
    ds, coef, _ = synth_mnp(10, 2000)
    truth = ThetaParams(coef[:-1], coef[-1], np.eye(2))
    shifted = ThetaParams(coef[:-1] + 1.0, coef[-1], np.eye(2))
    assert log_likelihood(ds, truth) > log_likelihood(ds, shifted)


def test_loglik_ghk_close_to_closed_form():
    ds, coef, _ = synth_mnp(11, 40)
    th = ThetaParams(coef[:-1], coef[-1], np.eye(2))
    cf = log_likelihood(ds, th)
    g = log_likelihood(ds, th, engine="ghk", m=4000, rng=RandomStream(12))
    assert g == pytest.approx(cf, abs=0.05 * abs(cf) / np.sqrt(40) + 0.5)


# ------------------------------------------------------------------------ MLE
def test_mle_recovers_truth_at_n2000():
    ds, coef, _ = synth_mnp(13, 2000)
    res = two_stage_mle_3alt(ds, theta_eye(0.0, 0.0))
    assert res.converged
    assert np.linalg.norm(res.theta.coefficients - coef) <= 0.1


def test_mle_restart_is_fixed_point():
    ds, _, _ = synth_mnp(14, 400)
    res = two_stage_mle_3alt(ds, theta_eye(0.0, 0.0))
    res2 = two_stage_mle_3alt(ds, res.theta)
    assert np.allclose(res2.theta.coefficients, res.theta.coefficients, atol=2e-4)


def test_mle_max_iterations_surfaces_best_point():
    ds, _, _ = synth_mnp(15, 200)
    with pytest.raises(MaxIterationsExceeded) as exc:
        two_stage_mle_3alt(ds, theta_eye(5.0, -5.0), maxiter=3)
    assert exc.value.best is not None
    assert np.all(np.isfinite(exc.value.best.theta.coefficients))
