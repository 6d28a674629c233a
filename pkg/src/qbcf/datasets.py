"""Dataset containers shared by the two estimation stages.

:class:`ChoiceDataset` holds one observation row per individual in raw
(undifferenced) form: the observed choice, the endogenous regressor and the
instruments for every alternative including the baseline, and optionally the
true first-stage errors when the data are synthetic.  The first stage
regresses each alternative's endogenous regressor on its own instruments;
differencing against the baseline then produces the second-stage covariates
and control functions.  Bootstrap resampling moves whole rows, so both
stages always see the same resampled individuals.

:class:`MnpDataset` is the second-stage view: the choice vector plus the
per-alternative covariate rows ``W_ij`` whose last column is the
control-function residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedWarning
from .first_stage import FirstStageData

__all__ = ["ChoiceDataset", "MnpDataset"]


@dataclass
class ChoiceDataset:
    """Raw per-observation data for both stages (alternatives 0..J)."""

    choices: np.ndarray  # (n,) ints in {0..J}
    x_endog: np.ndarray  # (n, J+1), raw endogenous regressor per alternative
    instruments: np.ndarray  # (n, J+1, d_z)
    v_true: np.ndarray | None = None  # (n, J+1), synthetic data only

    def __post_init__(self):
        self.choices = np.asarray(self.choices)
        if not np.issubdtype(self.choices.dtype, np.integer):
            as_int = self.choices.astype(int)
            if np.any(as_int != self.choices):
                raise ValueError("choices must be integers")
            self.choices = as_int
        self.x_endog = np.asarray(self.x_endog, dtype=float)
        self.instruments = np.asarray(self.instruments, dtype=float)
        n, n_alt = self.x_endog.shape
        if n_alt < 2:
            raise ValueError("need the baseline plus at least one alternative")
        J = n_alt - 1
        if self.choices.shape != (n,):
            raise ValueError("choices and x_endog disagree on n")
        if self.instruments.shape[:2] != (n, n_alt):
            raise ValueError("instruments must be (n, J+1, d_z)")
        if np.any(self.choices < 0) or np.any(self.choices > J):
            bad = int(np.flatnonzero((self.choices < 0) | (self.choices > J))[0])
            raise ValueError(f"choice out of range {{0..{J}}} at row {bad}")
        if self.v_true is not None:
            self.v_true = np.asarray(self.v_true, dtype=float)
            if self.v_true.shape != (n, n_alt):
                raise ValueError("v_true must be (n, J+1)")

    @property
    def n(self):
        return self.choices.shape[0]

    @property
    def n_alternatives(self):
        """Number of non-baseline alternatives J."""
        return self.x_endog.shape[1] - 1

    @property
    def x_diff(self):
        """Endogenous regressor differenced against the baseline, (n, J)."""
        return self.x_endog[:, 1:] - self.x_endog[:, [0]]

    @property
    def v_true_diff(self):
        if self.v_true is None:
            return None
        return self.v_true[:, 1:] - self.v_true[:, [0]]

    def first_stage_data(self, min_obs=20) -> FirstStageData:
        """Per-alternative regression problems for all of 0..J."""
        return FirstStageData(self.x_endog, self.instruments, min_obs=min_obs)

    def control_functions(self, residuals):
        """Difference raw first-stage residuals (n, J+1) against the baseline."""
        residuals = np.asarray(residuals, dtype=float)
        if residuals.shape != self.x_endog.shape:
            raise ValueError("residuals must be (n, J+1)")
        return residuals[:, 1:] - residuals[:, [0]]

    def subset(self, idx) -> "ChoiceDataset":
        """Row-subset (or resampled) copy; both stages move together."""
        return ChoiceDataset(
            self.choices[idx],
            self.x_endog[idx],
            self.instruments[idx],
            None if self.v_true is None else self.v_true[idx],
        )


@dataclass
class MnpDataset:
    """Second-stage multinomial-probit data.

    ``covariates[i, j]`` is the row ``W_ij`` entering alternative j's latent
    utility; by convention its last column is the control-function residual,
    so the coefficient vector is (beta_tilde..., lambda).
    """

    choices: np.ndarray  # (n,)
    covariates: np.ndarray  # (n, J, p)
    param_names: list = field(default=None)

    def __post_init__(self):
        self.choices = np.asarray(self.choices)
        self.covariates = np.asarray(self.covariates, dtype=float)
        if self.covariates.ndim != 3:
            raise ValueError("covariates must be (n, J, p)")
        n, J, p = self.covariates.shape
        if self.choices.shape != (n,):
            raise ValueError("choices and covariates disagree on n")
        if np.any(self.choices < 0) or np.any(self.choices > J):
            bad = int(np.flatnonzero((self.choices < 0) | (self.choices > J))[0])
            raise ValueError(f"choice out of range {{0..{J}}} at row {bad}")
        counts = np.bincount(self.choices, minlength=J + 1)
        if np.any(counts == 0):
            missing = np.flatnonzero(counts == 0).tolist()
            warnings.warn(
                f"alternatives never chosen: {missing}", IllConditionedWarning
            )
        if self.param_names is None:
            self.param_names = [f"beta_tilde_{k + 1}" for k in range(p - 1)] + ["lambda"]
        if len(self.param_names) != p:
            raise ValueError("param_names must have one entry per covariate column")

    @property
    def n(self):
        return self.choices.shape[0]

    @property
    def n_alternatives(self):
        return self.covariates.shape[1]

    @property
    def n_coefficients(self):
        return self.covariates.shape[2]

    @classmethod
    def from_control_functions(cls, choices, x_endog, residuals) -> "MnpDataset":
        """Assemble W = (x_endog, residual) per alternative."""
        x_endog = np.asarray(x_endog, dtype=float)
        residuals = np.asarray(residuals, dtype=float)
        if x_endog.shape != residuals.shape:
            raise ValueError("x_endog and residuals must have matching shapes")
        W = np.stack([x_endog, residuals], axis=2)
        return cls(choices, W, param_names=["beta_tilde_1", "lambda"])
