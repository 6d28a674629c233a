"""Bootstrap inference for the two-stage quasi-Bayesian estimator.

Each replication resamples whole observation rows with replacement, refits
the kernel first stage from scratch (bandwidth cross-validation included, so
first-stage estimation noise propagates), reruns the Gibbs sampler on the
resampled second stage, and records the quasi-posterior mean and standard
errors.  Intervals:

* percentile: empirical quantiles of the bootstrap means;
* percentile-t: quantiles of the studentized ratios
  ``(mean*_b - mean) / sd*_b`` mapped back through the full-sample mean and
  posterior standard deviation;
* single-draw variant: same resampling, but each replication contributes one
  post-burn-in posterior draw instead of the posterior mean (longer, more
  conservative intervals).

Replication ``b`` draws everything from the substream ``rng.substream(b)``,
so runs are reproducible and replications independent regardless of worker
count.  Failed replications (degenerate first stage, non-positive-definite
updates) are logged and skipped; the run aborts if more than 10% fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import parallel_map
from .datasets import ChoiceDataset, MnpDataset
from .errors import (
    DegenerateFirstStage,
    ExcessiveFailures,
    InsufficientReplications,
    NotPositiveDefinite,
    ZeroStandardError,
)
from .first_stage import fit_control_functions
from .mnp_gibbs import GibbsConfig, PosteriorSummary, PriorSpec, run_gibbs
from .rng import RandomStream

__all__ = [
    "BootstrapConfig",
    "BootstrapRun",
    "resample_rows",
    "run_bootstrap",
    "percentile_interval",
    "percentile_t_interval",
]

#: replications required before quantile-based intervals are trusted
MIN_REPLICATIONS = 50

#: abort threshold on the failed-replication share
MAX_FAILURE_SHARE = 0.10


@dataclass
class BootstrapConfig:
    """Replication counts plus pass-throughs for both estimation stages."""

    B: int
    S: int  # posterior draws per replication
    rng: RandomStream
    variant: str = "qbb"  # "qbb" (posterior means) or "qbb1" (single draws)
    prior: PriorSpec | None = None  # default: flat/Wishart baseline
    burn_in: int = 1000
    thin: int = 1
    fix_sigma: np.ndarray | None = None
    grid: list | None = None  # explicit first-stage bandwidth grid
    n_grid: int = 25  # default-grid controls when grid is None
    span: tuple = (0.05, 5.0)

    def __post_init__(self):
        if self.variant not in ("qbb", "qbb1"):
            raise ValueError("variant must be 'qbb' or 'qbb1'")
        if self.B < 1:
            raise ValueError("need at least one replication")
        if self.B < MIN_REPLICATIONS:
            import warnings

            warnings.warn(f"B < {MIN_REPLICATIONS} replications is too few for interval use")


@dataclass
class BootstrapRun:
    """Per-replication bootstrap record.

    Rows of ``theta_star``/``se_star`` are NaN for failed replications, which
    are listed in ``failures`` as (replication, reason).  ``first_draw``
    holds the first retained posterior draw of each chain and feeds the
    single-draw variant.
    """

    theta_star: np.ndarray  # (B, p)
    se_star: np.ndarray  # (B, p)
    first_draw: np.ndarray  # (B, p)
    ok: np.ndarray  # (B,) bool
    param_names: list
    variant: str = "qbb"
    failures: list = field(default_factory=list)
    seeds: list = field(default_factory=list)

    @property
    def n_success(self):
        return int(self.ok.sum())

    def as_qbb1(self) -> "BootstrapRun":
        """View of the same run with single draws in place of posterior means."""
        return replace(
            self,
            theta_star=self.first_draw,
            se_star=np.full_like(self.se_star, np.nan),
            variant="qbb1",
        )


def resample_rows(dataset: ChoiceDataset, rng: RandomStream) -> ChoiceDataset:
    """n rows drawn i.i.d. uniformly with replacement; rows move as a whole."""
    idx = rng.gen.integers(0, dataset.n, size=dataset.n)
    return dataset.subset(idx)


def _replication(args):
    dataset, config, b = args
    rep_rng = config.rng.substream(b)
    boot = resample_rows(dataset, rep_rng)
    fit = fit_control_functions(
        boot.first_stage_data(), grid=config.grid, n_grid=config.n_grid, span=config.span
    )
    mnp = MnpDataset.from_control_functions(
        boot.choices, boot.x_diff, boot.control_functions(fit.residuals)
    )
    prior = config.prior
    if prior is None:
        prior = PriorSpec.default(mnp.n_alternatives, mnp.n_coefficients)
    keep = 1 if config.variant == "qbb1" else config.S
    gibbs = GibbsConfig(
        rng=rep_rng,
        burn_in=config.burn_in,
        keep=keep,
        thin=config.thin,
        fix_sigma=config.fix_sigma,
    )
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # resamples may drop an alternative or use keep=1
        draws = run_gibbs(mnp, prior, gibbs).draws
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0, ddof=1) if keep > 1 else np.full(draws.shape[1], np.nan)
    return mean, sd, draws[0].copy()


def _replication_guarded(args):
    _, _, b = args
    try:
        return ("ok", b, _replication(args))
    except (DegenerateFirstStage, NotPositiveDefinite, np.linalg.LinAlgError) as exc:
        return ("fail", b, f"{type(exc).__name__}: {exc}")


def run_bootstrap(dataset: ChoiceDataset, config: BootstrapConfig, threads=1) -> BootstrapRun:
    """Run B resample->refit->re-Gibbs replications (replication b on substream b).

    Raises
    ------
    ExcessiveFailures
        If more than 10% of replications fail.
    """
    tasks = [(dataset, config, b) for b in range(1, config.B + 1)]
    results = parallel_map(_replication_guarded, tasks, threads=threads)

    first = next((r[2] for r in results if r[0] == "ok"), None)
    if first is None:
        raise ExcessiveFailures("every bootstrap replication failed")
    p = first[0].shape[0]
    theta = np.full((config.B, p), np.nan)
    se = np.full((config.B, p), np.nan)
    first_draw = np.full((config.B, p), np.nan)
    ok = np.zeros(config.B, dtype=bool)
    failures = []
    for status, b, payload in results:
        if status == "ok":
            theta[b - 1], se[b - 1], first_draw[b - 1] = payload
            ok[b - 1] = True
        else:
            failures.append((b, payload))
    if len(failures) > MAX_FAILURE_SHARE * config.B:
        raise ExcessiveFailures(
            f"{len(failures)} of {config.B} bootstrap replications failed"
        )

    fit_names = ["beta_tilde_1", "lambda"]
    if p > 2:
        from .mnp_gibbs import _sigma_param_names

        fit_names = fit_names + _sigma_param_names(dataset.n_alternatives)
    return BootstrapRun(
        theta, se, first_draw, ok, fit_names,
        variant=config.variant, failures=failures,
        seeds=list(range(1, config.B + 1)),
    )


def percentile_interval(run: BootstrapRun, j, alpha):
    """Equal-tailed percentile interval for coordinate j at level 1 - alpha.

    Raises
    ------
    InsufficientReplications
        With fewer than 50 successful replications.
    """
    vals = run.theta_star[run.ok, j]
    if vals.shape[0] < MIN_REPLICATIONS:
        raise InsufficientReplications(
            f"{vals.shape[0]} successful replications; need {MIN_REPLICATIONS}"
        )
    lo = float(np.quantile(vals, alpha / 2.0))
    hi = float(np.quantile(vals, 1.0 - alpha / 2.0))
    return lo, hi


def percentile_t_interval(run: BootstrapRun, summary: PosteriorSummary, j, alpha):
    """Percentile-t interval built from studentized bootstrap ratios.

    The ratios are centered at the full-sample quasi-posterior mean (the
    computable stand-in for the frequentist point estimator it tracks to
    first order) and studentized by each replication's quasi-posterior
    standard error; the same posterior-standard-deviation convention is used
    on the full sample.
    """
    vals = run.theta_star[run.ok, j]
    ses = run.se_star[run.ok, j]
    if np.any(~np.isfinite(ses)) or np.any(ses <= 0.0):
        raise ZeroStandardError("every replication needs a positive standard error")
    center = summary.mean[j]
    sd = summary.sd[j]
    if sd <= 0.0:
        raise ZeroStandardError("full-sample posterior standard deviation is zero")
    t = (vals - center) / ses
    q_lo = float(np.quantile(t, alpha / 2.0))
    q_hi = float(np.quantile(t, 1.0 - alpha / 2.0))
    return center - sd * q_hi, center - sd * q_lo
