"""Two-stage quasi-Bayesian estimation with kernel control functions.

Pipeline: a nonparametric kernel first stage turns instruments into
control-function residuals; a data-augmentation Gibbs sampler draws the
quasi-posterior of the multinomial-probit second stage; resampling the whole
two-stage procedure yields bootstrap confidence intervals whose coverage,
unlike the raw credible sets, accounts for first-stage estimation noise.
"""

from .bootstrap import (
    BootstrapConfig,
    BootstrapRun,
    percentile_interval,
    percentile_t_interval,
    resample_rows,
    run_bootstrap,
)
from .datasets import ChoiceDataset, MnpDataset
from .first_stage import (
    FirstStageData,
    FirstStageFit,
    fit_control_functions,
    loocv_bandwidth,
    nw_estimate,
    silverman_grid,
)
from .mnp_gibbs import (
    GibbsConfig,
    PosteriorDraws,
    PosteriorSummary,
    PriorSpec,
    gibbs_step_beta,
    gibbs_step_latents,
    gibbs_step_sigma,
    run_gibbs,
    summarize,
    truncation_region,
)
from .mnp_probs import (
    MleResult,
    ThetaParams,
    choice_probs_3alt,
    choice_probs_ghk,
    log_likelihood,
    two_stage_mle_3alt,
)
from .rng import RandomStream
from .simulation import (
    CoverageReport,
    DgpSpec,
    generate_dataset,
    run_coverage_experiment,
    tau,
)
from .stats import (
    bvn_cdf,
    cholesky,
    sample_mvn,
    sample_truncated_normal,
    sample_wishart,
)

__version__ = "0.1.0"
