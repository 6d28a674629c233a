import numpy as np
import pytest

from qbcf.errors import SingularPoint
from qbcf.mnp_probs import ThetaParams, choice_probs_3alt, choice_probs_ghk
from qbcf.rng import RandomStream
from qbcf.simulation import (
    DgpSpec,
    generate_dataset,
    run_coverage_experiment,
    tau,
)


@pytest.fixture(autouse=True)
def _quiet():
    import warnings

    warnings.simplefilter("ignore")
    yield


# ------------------------------------------------------------------------ tau
def test_tau_design_one_values():
    assert tau("I", 0.0) == 0.0
    assert tau("I", 1.0) == pytest.approx(0.9 + 0.9 + np.log(4.0), rel=1e-14)
    assert tau("I", 1.0) == pytest.approx(3.18629, abs=5e-6)


def test_tau_design_two_values():
    assert tau("II", 0.0) == 1.0
    z = 0.7
    assert tau("II", z) == pytest.approx(0.9 * z + 0.9 * z * z + np.exp(0.9 * z), rel=1e-14)


def test_tau_design_one_defined_below_minus_one():
    # log of the square is defined for z < -1 (the flagged alternative is not)
    assert np.isfinite(tau("I", -2.0))
    assert tau("I", -2.0) == pytest.approx(-0.9 * 2 + 0.9 * 4 + np.log(1.0), rel=1e-14)


def test_tau_singular_point():
    with pytest.raises(SingularPoint):
        tau("I", -1.0)
    with pytest.raises(SingularPoint):
        tau("I", np.array([0.0, -1.0, 2.0]))
    assert tau("II", -1.0) == pytest.approx(-0.9 + 0.9 + np.exp(-0.9))


def test_tau_vectorized():
    z = np.linspace(-0.9, 2.0, 7)
    assert np.array_equal(tau("I", z), np.array([tau("I", zz) for zz in z]))


# -------------------------------------------------------------------- DgpSpec
def test_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec(design="III")
    with pytest.raises(ValueError):
        DgpSpec(J=4)


def test_true_sigma_normalization_both_J():
    for J in (2, 3):
        spec = DgpSpec("I", J=J, n=100)
        sig = spec.true_sigma()
        assert sig[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.linalg.eigvalsh(sig) > 0)
    # J = 2 closed form: off-diagonal rho*sigma2 - 2*rho*sigma + 1
    spec = DgpSpec("I", J=2, n=100)
    s = np.sqrt(0.75)
    rho = s / 2
    expect = rho * 0.75 - 2 * rho * s + 1.0
    assert spec.true_sigma()[0, 1] == pytest.approx(expect, rel=1e-12)


def test_noise_cov_layout_four_choices():
    spec = DgpSpec("I", J=3, n=100)
    om = spec.noise_cov()
    s = np.sqrt(0.75)
    rho = s / 2
    assert om[0, 1] == pytest.approx(rho * s)  # correlated pair (0,1)
    assert om[2, 3] == pytest.approx(rho * 0.75)  # correlated pair (2,3)
    assert om[0, 2] == om[1, 3] == om[0, 3] == om[1, 2] == 0.0


# ------------------------------------------------------------ generate_dataset
def test_generate_deterministic():
    spec = DgpSpec("I", J=2, n=200)
    a, ta = generate_dataset(spec, RandomStream(1))
    b, tb = generate_dataset(spec, RandomStream(1))
    assert np.array_equal(a.x_endog, b.x_endog)
    assert np.array_equal(a.choices, b.choices)
    assert np.array_equal(ta["v_diff"], tb["v_diff"])


def test_generate_shapes_and_truth():
    spec = DgpSpec("II", J=3, n=300)
    ds, truth = generate_dataset(spec, RandomStream(2))
    assert ds.x_endog.shape == (300, 4)
    assert ds.instruments.shape == (300, 4, 1)
    assert ds.n_alternatives == 3
    assert set(np.unique(ds.choices)) <= {0, 1, 2, 3}
    assert truth["sigma"].shape == (3, 3)
    assert np.array_equal(ds.v_true_diff, truth["v_diff"])


def test_exogenous_switch_makes_regressor_independent():
    spec = DgpSpec("I", J=2, n=10**5, lam=0.0)
    ds, truth = generate_dataset(spec, RandomStream(3))
    eps_diff = truth["u_diff"] - spec.beta_tilde * ds.x_diff
    corr = np.corrcoef(ds.x_diff.ravel(), eps_diff.ravel())[0, 1]
    assert abs(corr) < 0.01


def test_endogeneity_present_when_lambda_positive():
    spec = DgpSpec("I", J=2, n=10**5, lam=0.6)
    ds, truth = generate_dataset(spec, RandomStream(4))
    eps_diff = truth["u_diff"] - spec.beta_tilde * ds.x_diff
    corr = np.corrcoef(ds.x_diff.ravel(), eps_diff.ravel())[0, 1]
    assert corr > 0.15


def test_choices_match_differenced_decision_rule():
    spec = DgpSpec("I", J=2, n=5000)
    ds, truth = generate_dataset(spec, RandomStream(5))
    ud = truth["u_diff"]
    best = ud.max(axis=1)
    implied = np.where(best <= 0, 0, ud.argmax(axis=1) + 1)
    assert np.array_equal(implied, ds.choices)


def test_choice_shares_match_model_probabilities():
    # closed-form probabilities at the true parameters, averaged over the
    # sample, must match the empirical shares; GHK is spot-checked against
    # the closed form on a subsample
    spec = DgpSpec("I", J=2, n=10**5)
    ds, truth = generate_dataset(spec, RandomStream(6))
    theta = ThetaParams([truth["beta_tilde"]], truth["lambda"], truth["sigma"])
    W1 = np.stack([ds.x_diff[:, 0], truth["v_diff"][:, 0]], axis=1)
    W2 = np.stack([ds.x_diff[:, 1], truth["v_diff"][:, 1]], axis=1)
    probs = choice_probs_3alt(theta, W1, W2)
    shares = np.bincount(ds.choices, minlength=3) / ds.n
    assert np.max(np.abs(probs.mean(axis=0) - shares)) < 0.01
    for i in range(0, 200, 40):
        g, _ = choice_probs_ghk(theta, np.stack([W1[i], W2[i]]), 10**4, RandomStream(7, i))
        assert np.max(np.abs(g - probs[i])) < 0.01


def test_posterior_near_truth_with_true_residuals():
    # n=1000 Design I with the true control functions plugged in: the
    # posterior mean of (beta_tilde, lambda) sits within 3 posterior sds
    # of (1, 0.6)
    from qbcf.datasets import MnpDataset
    from qbcf.mnp_gibbs import GibbsConfig, PriorSpec, run_gibbs, summarize

    spec = DgpSpec("I", J=2, n=1000)
    ds, truth = generate_dataset(spec, RandomStream(30))
    mnp = MnpDataset.from_control_functions(ds.choices, ds.x_diff, truth["v_diff"])
    cfg = GibbsConfig(rng=RandomStream(31), burn_in=1000, keep=1500)
    s = summarize(run_gibbs(mnp, PriorSpec.default(2, 2), cfg))
    assert abs(s.mean[0] - 1.0) < 3 * s.sd[0]
    assert abs(s.mean[1] - 0.6) < 3 * s.sd[1]


# --------------------------------------------------------- coverage experiment
def test_coverage_experiment_smoke_and_determinism():
    spec = DgpSpec("I", J=2, n=150)
    kwargs = dict(
        reps=2, levels=(0.90,), methods=("QB", "QBB", "QBB-t", "QBB1"),
        B=50, S=60, burn_in=40, threads=1,
    )
    rep = run_coverage_experiment(spec, rng=RandomStream(8), **kwargs)
    assert rep.reps_effective == 2
    assert set(rep.coverage) == {(m, 0.90) for m in ("QB", "QBB", "QBB-t", "QBB1")}
    for key, cov in rep.coverage.items():
        assert 0.0 <= cov <= 1.0
        assert rep.avg_length[key] > 0.0
    rows = rep.to_long_rows()
    assert len(rows) == 4
    table = rep.format_table()
    assert "QBB-t" in table and "coverage" in table
    rep2 = run_coverage_experiment(spec, rng=RandomStream(8), **kwargs)
    assert rep.coverage == rep2.coverage
    assert rep.avg_length == rep2.avg_length


def test_coverage_experiment_thread_invariant():
    spec = DgpSpec("II", J=2, n=150)
    kwargs = dict(reps=3, levels=(0.90,), methods=("QB",), B=0, S=80, burn_in=40)
    a = run_coverage_experiment(spec, rng=RandomStream(9), threads=1, **kwargs)
    b = run_coverage_experiment(spec, rng=RandomStream(9), threads=2, **kwargs)
    assert a.coverage == b.coverage
    assert a.avg_length == b.avg_length


def test_coverage_experiment_true_residuals_path():
    spec = DgpSpec("I", J=2, n=150, lam=0.0)
    rep = run_coverage_experiment(
        spec, reps=2, rng=RandomStream(10), levels=(0.90,), methods=("QB",),
        B=0, S=60, burn_in=40, use_true_residuals=True, threads=1,
    )
    assert rep.reps_effective == 2
