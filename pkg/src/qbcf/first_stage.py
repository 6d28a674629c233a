"""Nonparametric first stage: kernel regression and control-function residuals.

Each endogenous regressor (one per non-baseline alternative) is regressed on
that alternative's instruments with a Nadaraya-Watson estimator using a
product Gaussian kernel, ``K(u) = exp(-u^2 / 2)`` per dimension.  Bandwidths
are chosen per alternative by leave-one-out cross-validation over a fixed
grid; the fitted conditional means are then computed in-sample (own
observation included) and the residuals serve as control functions in the
second stage.

The default bandwidth grid is geometric with 25 points spanning
``[0.05, 5] x`` the Gaussian rule-of-thumb ``1.06 * sd * n^(-1/5)`` applied
per instrument dimension, so runs are reproducible without tuning.  Query
points where every kernel weight underflows raise :class:`AllWeightsZero`;
inside a fit they fall back to the nearest neighbour in (bandwidth-scaled)
instrument space, and the whole fit aborts with :class:`DegenerateFirstStage`
if more than 5% of observations need the fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import AllWeightsZero, DegenerateFirstStage

__all__ = [
    "FirstStageData",
    "FirstStageFit",
    "nw_estimate",
    "loocv_bandwidth",
    "silverman_grid",
    "fit_control_functions",
]

#: fraction of fallback observations above which a fit is declared degenerate
DEGENERATE_SHARE = 0.05


@dataclass
class FirstStageData:
    """Inputs of the first stage.

    x_endog : (n, J) endogenous regressor per non-baseline alternative.
    instruments : (n, J, d_z) instrument block per alternative.
    """

    x_endog: np.ndarray
    instruments: np.ndarray
    min_obs: int = 20

    def __post_init__(self):
        self.x_endog = np.asarray(self.x_endog, dtype=float)
        self.instruments = np.asarray(self.instruments, dtype=float)
        if self.x_endog.ndim != 2:
            raise ValueError("x_endog must be (n, J)")
        n, J = self.x_endog.shape
        if self.instruments.shape[:2] != (n, J) or self.instruments.ndim != 3:
            raise ValueError("instruments must be (n, J, d_z)")
        if not (np.all(np.isfinite(self.x_endog)) and np.all(np.isfinite(self.instruments))):
            raise ValueError("non-finite values in first-stage data")
        if n < self.min_obs:
            raise ValueError(f"need at least {self.min_obs} observations for CV, got {n}")

    @property
    def n(self):
        return self.x_endog.shape[0]

    @property
    def n_alternatives(self):
        return self.x_endog.shape[1]


@dataclass
class FirstStageFit:
    """Fitted conditional means, LOO-CV bandwidths and residuals.

    ``residuals + fitted`` reproduces the raw endogenous regressor exactly;
    ``cv_scores[j]`` is the achieved LOO criterion at the chosen bandwidth.
    """

    bandwidths: np.ndarray  # (J, d_z)
    fitted: np.ndarray  # (n, J)
    residuals: np.ndarray  # (n, J)
    cv_scores: np.ndarray  # (J,)


def _kernel_weights(query, data_x, bandwidth):
    u = (np.asarray(query, dtype=float) - data_x) / bandwidth
    return np.exp(-0.5 * np.sum(u * u, axis=1))


def nw_estimate(query, data_x, data_y, bandwidth, exclude_index=None):
    """Nadaraya-Watson estimate at ``query`` with a product Gaussian kernel.

    Parameters
    ----------
    query : (d,) point at which to estimate the conditional mean.
    data_x : (n, d) regressor sample.
    data_y : (n,) response sample.
    bandwidth : (d,) positive bandwidths, one per dimension.
    exclude_index : optional row left out of the weighted average (for LOO).

    Raises
    ------
    AllWeightsZero
        If every kernel weight underflows at the query point.
    """
    data_x = np.asarray(data_x, dtype=float)
    if data_x.ndim == 1:  # a flat vector means one regressor column
        data_x = data_x[:, None]
    data_y = np.asarray(data_y, dtype=float)
    if data_x.shape[0] != data_y.shape[0]:
        raise ValueError("data_x and data_y disagree on the number of rows")
    bandwidth = np.broadcast_to(np.asarray(bandwidth, dtype=float), (data_x.shape[1],))
    if np.any(bandwidth <= 0.0):
        raise ValueError("bandwidths must be positive")
    w = _kernel_weights(np.atleast_1d(query), data_x, bandwidth)
    if exclude_index is not None:
        if not 0 <= exclude_index < data_x.shape[0]:
            raise ValueError("exclude_index out of range")
        w = w.copy()
        w[exclude_index] = 0.0
    total = w.sum()
    if total == 0.0:
        raise AllWeightsZero("all kernel weights underflowed at the query point")
    return float(w @ data_y / total)


def _sq_dists(data_x):
    # per-dimension squared differences, shape (d, n, n)
    x = data_x.T[:, :, None]
    return (x - np.swapaxes(x, 1, 2)) ** 2


@njit(cache=True)
def _loo_pass(sq_dists, data_y, inv_h2, pred, flagged):
    d, n, _ = sq_dists.shape
    for i in range(n):
        num = 0.0
        den = 0.0
        for l in range(n):
            if l == i:
                continue
            s = 0.0
            for k in range(d):
                s += sq_dists[k, i, l] * inv_h2[k]
            w = math.exp(-0.5 * s)
            num += w * data_y[l]
            den += w
        if den == 0.0:
            flagged[i] = True
            pred[i] = 0.0
        else:
            flagged[i] = False
            pred[i] = num / den


@njit(cache=True)
def _insample_pass(sq_dists, data_y, inv_h2, fitted, flagged):
    d, n, _ = sq_dists.shape
    for i in range(n):
        num = 0.0
        den = 0.0
        for l in range(n):
            s = 0.0
            for k in range(d):
                s += sq_dists[k, i, l] * inv_h2[k]
            w = math.exp(-0.5 * s)
            num += w * data_y[l]
            den += w
        if den == 0.0:
            flagged[i] = True
            fitted[i] = 0.0
        else:
            flagged[i] = False
            fitted[i] = num / den


def _loo_predictions(sq_dists, data_y, bandwidth):
    n = data_y.shape[0]
    pred = np.empty(n)
    flagged = np.empty(n, dtype=np.bool_)
    _loo_pass(sq_dists, data_y, 1.0 / bandwidth**2, pred, flagged)
    return pred, flagged


def _cv_score(sq_dists, data_y, bandwidth):
    pred, flagged = _loo_predictions(sq_dists, data_y, bandwidth)
    err = (data_y - pred) ** 2
    if np.any(flagged):
        err[flagged] = np.var(data_y)  # penalized contribution
    return float(err.mean())


def loocv_bandwidth(data_x, data_y, grid):
    """Grid point minimizing the leave-one-out CV criterion.

    The criterion is ``mean_i (y_i - nw_estimate(x_i, exclude i))^2``; query
    points with zero leave-one-out kernel mass contribute a penalized squared
    error equal to the response variance.  Ties are broken toward the larger
    bandwidth (by product of components).

    Returns
    -------
    (bandwidth, cv_score)
    """
    data_x = np.asarray(data_x, dtype=float)
    if data_x.ndim == 1:
        data_x = data_x[:, None]
    data_y = np.asarray(data_y, dtype=float)
    if data_x.shape[0] != data_y.shape[0]:
        raise ValueError("data_x and data_y disagree on the number of rows")
    grid = [np.broadcast_to(np.asarray(h, dtype=float), (data_x.shape[1],)) for h in grid]
    if not grid:
        raise ValueError("bandwidth grid is empty")
    sq = _sq_dists(data_x)
    best_h, best_score, best_size = None, np.inf, -np.inf
    for h in grid:
        score = _cv_score(sq, data_y, h)
        size = float(np.prod(h))
        if score < best_score or (score == best_score and size > best_size):
            best_h, best_score, best_size = h, score, size
    return np.array(best_h), best_score


def silverman_grid(data_x, n_grid=25, span=(0.05, 5.0)):
    """Geometric bandwidth grid anchored at the per-dimension Gaussian rule.

    The anchor is ``1.06 * sd_k * n^(-1/5)`` per dimension; the grid scales it
    by ``n_grid`` geometric multipliers spanning ``span``.
    """
    data_x = np.asarray(data_x, dtype=float)
    if data_x.ndim == 1:
        data_x = data_x[:, None]
    n = data_x.shape[0]
    sd = data_x.std(axis=0)
    anchor = 1.06 * np.where(sd > 0, sd, 1.0) * n ** (-0.2)
    multipliers = np.geomspace(span[0], span[1], n_grid)
    return [m * anchor for m in multipliers]


def _insample_fit(sq_dists, data_y, bandwidth):
    n = data_y.shape[0]
    fitted = np.empty(n)
    flagged = np.empty(n, dtype=np.bool_)
    _insample_pass(sq_dists, data_y, 1.0 / bandwidth**2, fitted, flagged)
    if np.any(flagged):
        # nearest other observation in bandwidth-scaled instrument space
        scaled = np.tensordot(1.0 / bandwidth**2, sq_dists, axes=1)
        np.fill_diagonal(scaled, np.inf)
        fitted[flagged] = data_y[np.argmin(scaled[flagged], axis=1)]
    return fitted, flagged


def fit_control_functions(data: FirstStageData, grid=None, n_grid=25, span=(0.05, 5.0)) -> FirstStageFit:
    """Per-alternative LOO-CV kernel fits and control-function residuals.

    ``grid`` is an explicit list of bandwidth vectors applied to every
    alternative; by default each alternative gets :func:`silverman_grid` of
    its own instruments with ``n_grid`` points spanning ``span``.

    Raises
    ------
    DegenerateFirstStage
        If more than 5% of observations in any alternative have zero kernel
        mass even with the own observation included.
    """
    J = data.n_alternatives
    d_z = data.instruments.shape[2]
    bandwidths = np.empty((J, d_z))
    fitted = np.empty((data.n, J))
    cv_scores = np.empty(J)
    for j in range(J):
        Z = data.instruments[:, j, :]
        y = data.x_endog[:, j]
        grid_j = grid if grid is not None else silverman_grid(Z, n_grid=n_grid, span=tuple(span))
        h, score = loocv_bandwidth(Z, y, grid_j)
        sq = _sq_dists(Z)
        fit_j, flagged = _insample_fit(sq, y, h)
        if flagged.mean() > DEGENERATE_SHARE:
            raise DegenerateFirstStage(
                f"{flagged.sum()} of {data.n} observations have zero kernel mass "
                f"for alternative {j + 1}"
            )
        bandwidths[j] = h
        fitted[:, j] = fit_j
        cv_scores[j] = score
    residuals = data.x_endog - fitted
    return FirstStageFit(bandwidths, fitted, residuals, cv_scores)
