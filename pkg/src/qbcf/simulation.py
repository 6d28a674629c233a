"""Synthetic choice designs and the Monte Carlo coverage experiment.

Data-generating process (per observation i, alternatives j = 0..J):

* instruments ``xi_ij`` and first-stage errors ``v_ij`` i.i.d. standard
  normal;
* endogenous regressor ``Xe_ij = tau(xi_ij) + v_ij`` with a design-specific
  link: Design I ``tau(z) = 0.9 z + 0.9 z^2 + log((z+1)^2)`` (read as the log
  of the square, which is defined for z < -1; the square-of-log reading is
  the flagged alternative), Design II ``tau(z) = 0.9 z + 0.9 z^2 +
  exp(0.9 z)``;
* utility error ``eps_ij = lam * v_ij + noise_ij`` where the noise is jointly
  normal with variances (1, sigma2, ..., sigma2) and correlation rho =
  sqrt(sigma2)/2 on all pairs (J = 2) or on the (0,1) and (2,3) pairs only
  (J = 3);
* latent utility ``U_ij = beta_tilde * Xe_ij + eps_ij``; the choice is the
  utility argmax.

The first stage regresses each alternative's raw ``Xe_ij`` on its own
instrument ``xi_ij`` (one kernel regression per alternative 0..J) and the
residuals are differenced against the baseline to form the control
functions, which is how the simulation study is run in the source design;
the true differenced errors ``vd = v_ij - v_i0`` are kept for diagnostics.

The coverage experiment repeats: simulate, fit the first stage, run the
Gibbs chain (credible intervals), bootstrap (percentile, percentile-t and
single-draw intervals), and scores each interval's coverage of the true
``beta_tilde`` and its length, aggregating into a methods-by-levels report.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .bootstrap import (
    BootstrapConfig,
    percentile_interval,
    percentile_t_interval,
    run_bootstrap,
)
from .datasets import ChoiceDataset, MnpDataset
from .errors import (
    DegenerateFirstStage,
    ExcessiveFailures,
    InsufficientReplications,
    NotPositiveDefinite,
    SingularPoint,
    ZeroStandardError,
)
from .first_stage import fit_control_functions
from .mnp_gibbs import GibbsConfig, PriorSpec, run_gibbs, summarize
from .rng import RandomStream
from .stats import cholesky

__all__ = [
    "DgpSpec",
    "CoverageReport",
    "tau",
    "generate_dataset",
    "run_coverage_experiment",
    "METHODS",
]

METHODS = ("QB", "QBB", "QBB-t", "QBB1")
_BOOTSTRAP_METHODS = ("QBB", "QBB-t", "QBB1")


def tau(design, z):
    """Design-specific first-stage link function (vectorized in z).

    Raises
    ------
    SingularPoint
        Design I at z = -1, where log((z+1)^2) diverges.
    """
    z = np.asarray(z, dtype=float)
    if design == "I":
        if np.any(z == -1.0):
            raise SingularPoint("Design I link undefined at z = -1")
        return 0.9 * z + 0.9 * z * z + np.log((z + 1.0) ** 2)
    if design == "II":
        return 0.9 * z + 0.9 * z * z + np.exp(0.9 * z)
    raise ValueError(f"unknown design {design!r}")


@dataclass
class DgpSpec:
    """Simulation design parameters (defaults follow the coverage study)."""

    design: str = "I"
    J: int = 2
    n: int = 500
    beta_tilde: float = 1.0
    lam: float = 0.6
    sigma2: float = 0.75

    def __post_init__(self):
        if self.design not in ("I", "II"):
            raise ValueError("design must be 'I' or 'II'")
        if self.J not in (2, 3):
            raise ValueError("the correlation layout is defined for J = 2 or 3")
        cholesky(self.noise_cov())  # positive definiteness check

    def noise_cov(self):
        """Covariance of the jointly normal utility noise over {0..J}."""
        s = np.sqrt(self.sigma2)
        rho = s / 2.0
        sd = np.array([1.0] + [s] * self.J)
        corr = np.eye(self.J + 1)
        if self.J == 2:
            corr[corr == 0.0] = rho
        else:
            corr[0, 1] = corr[1, 0] = rho
            corr[2, 3] = corr[3, 2] = rho
        return corr * np.outer(sd, sd)

    def true_sigma(self):
        """Covariance of the differenced remainder errors; (1,1) entry is 1."""
        D = np.hstack([-np.ones((self.J, 1)), np.eye(self.J)])
        return D @ self.noise_cov() @ D.T


def generate_dataset(spec: DgpSpec, rng: RandomStream):
    """Simulate one sample; returns (ChoiceDataset, truth diagnostics).

    The truth dict carries the parameters, the true differenced control
    errors ``v_diff``, latents ``u_diff`` and conditional means ``zeta`` so
    oracle tests can bypass the first stage.
    """
    gen = rng.gen
    n, J = spec.n, spec.J
    xi = gen.standard_normal((n, J + 1))
    if spec.design == "I":
        bad = xi == -1.0
        while np.any(bad):  # probability-zero event; resample the entries
            xi[bad] = gen.standard_normal(int(bad.sum()))
            bad = xi == -1.0
    v = gen.standard_normal((n, J + 1))
    noise = gen.standard_normal((n, J + 1)) @ cholesky(spec.noise_cov()).T
    x_endog = tau(spec.design, xi) + v
    eps = spec.lam * v + noise
    utility = spec.beta_tilde * x_endog + eps
    choices = np.argmax(utility, axis=1)

    v_diff = v[:, 1:] - v[:, [0]]
    u_diff = utility[:, 1:] - utility[:, [0]]
    dataset = ChoiceDataset(choices, x_endog, xi[:, :, None], v_true=v)
    truth = {
        "beta_tilde": spec.beta_tilde,
        "lambda": spec.lam,
        "sigma": spec.true_sigma(),
        "v_raw": v,
        "v_diff": v_diff,
        "u_diff": u_diff,
        "tau_values": tau(spec.design, xi),
    }
    return dataset, truth


@dataclass
class CoverageReport:
    """Empirical coverage and average interval length, methods x levels."""

    methods: list
    levels: list
    coverage: dict  # (method, level) -> float
    avg_length: dict  # (method, level) -> float
    reps_requested: int
    reps_effective: int
    failures: list = field(default_factory=list)
    runtime_seconds: float = 0.0
    spec: DgpSpec | None = None

    def to_long_rows(self):
        rows = []
        for method in self.methods:
            for level in self.levels:
                rows.append(
                    {
                        "method": method,
                        "level": level,
                        "coverage": self.coverage[(method, level)],
                        "avg_length": self.avg_length[(method, level)],
                        "reps": self.reps_effective,
                    }
                )
        return rows

    def format_table(self):
        """Plain-text table in the methods-by-levels layout."""
        lvl = "".join(f"{lv:>9.2f}" for lv in self.levels)
        lines = [
            f"coverage of beta_tilde ({self.reps_effective} effective replications)",
            f"{'method':<8}|{lvl}   |{lvl}",
            f"{'':<8}|{'coverage':>{9 * len(self.levels)}}   |{'avg length':>{9 * len(self.levels)}}",
            "-" * (12 + 18 * len(self.levels) + 4),
        ]
        for method in self.methods:
            cov = "".join(f"{self.coverage[(method, lv)]:>9.3f}" for lv in self.levels)
            ln = "".join(f"{self.avg_length[(method, lv)]:>9.3f}" for lv in self.levels)
            lines.append(f"{method:<8}|{cov}   |{ln}")
        lines.append(f"runtime: {self.runtime_seconds:.1f} s")
        return "\n".join(lines)


def _coverage_replication(args):
    (spec, rep, levels, methods, B, S, burn_in, use_true_residuals, rng) = args
    rep_rng = rng.substream(rep)
    dataset, truth = generate_dataset(spec, rep_rng.substream(0))
    if use_true_residuals:
        control = truth["v_diff"]
    else:
        fit = fit_control_functions(dataset.first_stage_data())
        control = dataset.control_functions(fit.residuals)
    mnp = MnpDataset.from_control_functions(dataset.choices, dataset.x_diff, control)
    prior = PriorSpec.default(mnp.n_alternatives, mnp.n_coefficients)
    gibbs_cfg = GibbsConfig(rng=rep_rng.substream(1), burn_in=burn_in, keep=S)
    summary = summarize(run_gibbs(mnp, prior, gibbs_cfg), levels=tuple(levels))

    target = truth["beta_tilde"]
    out = {}
    for level in levels:
        lo, hi = summary.intervals[level][0]  # beta_tilde coordinate
        out[("QB", level)] = (lo <= target <= hi, hi - lo)

    if any(m in methods for m in _BOOTSTRAP_METHODS):
        boot_cfg = BootstrapConfig(
            B=B, S=S, rng=rep_rng.substream(2), burn_in=burn_in
        )
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            run = run_bootstrap(dataset, boot_cfg, threads=1)
        qbb1 = run.as_qbb1()
        for level in levels:
            alpha = 1.0 - level
            if "QBB" in methods:
                lo, hi = percentile_interval(run, 0, alpha)
                out[("QBB", level)] = (lo <= target <= hi, hi - lo)
            if "QBB-t" in methods:
                lo, hi = percentile_t_interval(run, summary, 0, alpha)
                out[("QBB-t", level)] = (lo <= target <= hi, hi - lo)
            if "QBB1" in methods:
                lo, hi = percentile_interval(qbb1, 0, alpha)
                out[("QBB1", level)] = (lo <= target <= hi, hi - lo)
    return out


def _coverage_replication_guarded(args):
    rep = args[1]
    try:
        return ("ok", rep, _coverage_replication(args))
    except (
        DegenerateFirstStage,
        NotPositiveDefinite,
        ExcessiveFailures,
        InsufficientReplications,
        ZeroStandardError,
        np.linalg.LinAlgError,
    ) as exc:
        return ("fail", rep, f"{type(exc).__name__}: {exc}")


def run_coverage_experiment(
    spec: DgpSpec,
    reps,
    rng: RandomStream,
    levels=(0.90, 0.95, 0.99),
    methods=METHODS,
    B=100,
    S=1000,
    burn_in=1000,
    use_true_residuals=False,
    threads=1,
) -> CoverageReport:
    """Monte Carlo coverage study; replication r runs on ``rng.substream(r)``.

    Coverage is scored for the ``beta_tilde`` coordinate only.  Replication
    failures are logged and excluded; the report carries the effective count.
    """
    methods = [m for m in METHODS if m in set(methods)]
    levels = list(levels)
    start = time.perf_counter()
    tasks = [
        (spec, r, levels, methods, B, S, burn_in, use_true_residuals, rng)
        for r in range(1, reps + 1)
    ]
    results = parallel_map(_coverage_replication_guarded, tasks, threads=threads)

    failures = [(rep, msg) for status, rep, msg in results if status == "fail"]
    records = [payload for status, _, payload in results if status == "ok"]
    coverage, avg_length = {}, {}
    for method in methods:
        for level in levels:
            cells = [rec[(method, level)] for rec in records if (method, level) in rec]
            if cells:
                coverage[(method, level)] = float(np.mean([c[0] for c in cells]))
                avg_length[(method, level)] = float(np.mean([c[1] for c in cells]))
            else:
                coverage[(method, level)] = np.nan
                avg_length[(method, level)] = np.nan
    return CoverageReport(
        methods=methods,
        levels=levels,
        coverage=coverage,
        avg_length=avg_length,
        reps_requested=reps,
        reps_effective=len(records),
        failures=failures,
        runtime_seconds=time.perf_counter() - start,
        spec=spec,
    )
