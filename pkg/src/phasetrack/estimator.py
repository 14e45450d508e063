"""Phase-offset estimators fed by the discrimination data.

Each detection is binned by its photon number ``n`` (rows, capped at the
PNR limit) and by the LO phase relative to the receiver's verdict,
delta_m = m*pi/2 (columns). Two estimators read such histograms:

* the sine-cosine estimator, built from differences of column means and
  calibrated by a bias factor ``f``, a weight ``r`` and a gain curve ``g``;
* a grid Bayesian estimator returning the circular mean of the phase
  posterior.

The combination step uses |phi_c| on the right-hand side:

    phi_i = sign(phi_s) * (|phi_c| + r |phi_s|) / (1 + r)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .physics import ReceiverParams, bin_mean
from .receiver import DetectionRecord, PulseBatch, _pnr_probabilities

WINDOW_PULSES = 500
BAYES_GRID_POINTS = 2048


class EstimationUnavailable(ValueError):
    """The histogram lacks data in a column the estimator needs."""


class UndefinedEstimate(ValueError):
    """The phase posterior has no preferred direction."""


@dataclass
class PhotonHistogram:
    """Counts N[n, m] of n detected photons at relative LO phase m*pi/2."""

    counts: np.ndarray
    pulses_accumulated: int = 0

    @classmethod
    def empty(cls, pnr_cap: int) -> "PhotonHistogram":
        return cls(np.zeros((pnr_cap + 1, 4), dtype=np.int64), 0)

    @property
    def pnr_cap(self) -> int:
        return self.counts.shape[0] - 1

    @property
    def column_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def column_means(self) -> np.ndarray:
        """Mean photon number per column; NaN where the column is empty."""
        n = np.arange(self.counts.shape[0])[:, None]
        tot = self.column_totals
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, (n * self.counts).sum(axis=0) / np.maximum(tot, 1), np.nan)

    def add_batch(self, batch: PulseBatch, use_truth: bool = False) -> None:
        self.counts += histogram_counts(batch, self.pnr_cap, use_truth)
        self.pulses_accumulated += len(batch)

    def add_record(self, rec: DetectionRecord) -> None:
        rel = (rec.lo_indices - rec.verdict_index) % 4
        np.add.at(self.counts, (np.asarray(rec.counts), rel), 1)
        self.pulses_accumulated += 1

    def reset(self) -> None:
        self.counts[:] = 0
        self.pulses_accumulated = 0

    def copy(self) -> "PhotonHistogram":
        return PhotonHistogram(self.counts.copy(), self.pulses_accumulated)


def histogram_counts(batch: PulseBatch, pnr_cap: int, use_truth: bool = False,
                     groups: int | None = None) -> np.ndarray:
    """Bin a pulse batch into N[n, m].

    With ``groups`` the batch is split into that many equal consecutive
    blocks and an array of shape (groups, pnr_cap+1, 4) is returned.
    ``use_truth`` references the true symbol instead of the verdict.
    """
    ref = batch.truth_idx if use_truth else batch.verdict_idx
    rel = (batch.lo_idx - ref[:, None]) % 4
    cell = batch.counts * 4 + rel
    size = (pnr_cap + 1) * 4
    if groups is None:
        return np.bincount(cell.ravel(), minlength=size).reshape(pnr_cap + 1, 4)
    B = len(batch)
    if B % groups:
        raise ValueError("batch size must be a multiple of groups")
    gid = np.repeat(np.arange(groups), B // groups)[:, None]
    flat = (gid * size + cell).ravel()
    return np.bincount(flat, minlength=groups * size).reshape(groups, pnr_cap + 1, 4)


def accumulate(records: Iterable[DetectionRecord], pnr_cap: int = 3) -> PhotonHistogram:
    hist = PhotonHistogram.empty(pnr_cap)
    for rec in records:
        hist.add_record(rec)
    return hist


def column_means(counts: np.ndarray) -> np.ndarray:
    """Column means for one histogram (n+1, 4) or a stack (..., n+1, 4)."""
    n = np.arange(counts.shape[-2])[:, None]
    tot = counts.sum(axis=-2)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, (n * counts).sum(axis=-2) / np.maximum(tot, 1), np.nan)


def sincos_from_means(means: np.ndarray, scale, r) -> np.ndarray:
    """Vectorised phi_i from column means (..., 4) and C = f * 4 eta xi |alpha|^2 / N."""
    means = np.asarray(means, dtype=float)
    cos_arg = np.clip((means[..., 2] - means[..., 0]) / scale, -1.0, 1.0)
    sin_arg = np.clip((means[..., 3] - means[..., 1]) / scale, -1.0, 1.0)
    phi_c = np.arccos(cos_arg)
    phi_s = np.arcsin(sin_arg)
    return np.sign(phi_s) * (np.abs(phi_c) + r * np.abs(phi_s)) / (1.0 + r)


def sincos_phi_i(hist: PhotonHistogram, params: ReceiverParams, calib) -> float:
    """Single-window sine-cosine estimate phi_i."""
    if np.any(hist.column_totals == 0):
        raise EstimationUnavailable("empty histogram column; extend the accumulation window")
    scale = calib.f_opt * params.interference_scale
    return float(sincos_from_means(hist.column_means(), scale, calib.r_opt))


def sincos_final(phi_list: Sequence[float], calib) -> float:
    """Average the phi_i estimates and apply the gain curve."""
    if len(phi_list) == 0:
        raise ValueError("need at least one phi_i estimate")
    avg = float(np.mean(phi_list))
    return float(calib.gain(avg) * avg)


@dataclass(frozen=True)
class PhaseGrid:
    points: int = BAYES_GRID_POINTS

    @property
    def phi(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.points) / self.points


def bayes_log_likelihood(params: ReceiverParams, points: int = BAYES_GRID_POINTS) -> np.ndarray:
    """log L(n | phi - delta_m) as an array (n+1, 4, grid)."""
    phi = PhaseGrid(points).phi
    delta = np.arange(4) * (np.pi / 2)
    mu = bin_mean(delta[:, None], phi[None, :], params)
    with np.errstate(divide="ignore"):
        return np.log(_pnr_probabilities(mu, params.pnr_cap))


def bayes_posterior(counts: np.ndarray, params: ReceiverParams, prior=None,
                    points: int = BAYES_GRID_POINTS, loglik=None) -> np.ndarray:
    """Normalised posterior on the grid; ``counts`` may be a stack (..., n+1, 4)."""
    if loglik is None:
        loglik = bayes_log_likelihood(params, points)
    counts = np.asarray(counts)
    flat = counts.reshape(counts.shape[:-2] + (-1,)).astype(float)
    ll = loglik.reshape(-1, loglik.shape[-1])
    # 0 * log(0) cells carry no information
    ll = np.maximum(ll, -745.0)
    logpost = flat @ ll
    if prior is not None:
        with np.errstate(divide="ignore"):
            logpost = logpost + np.log(np.asarray(prior, dtype=float))
    logpost -= logsumexp(logpost, axis=-1, keepdims=True)
    return np.exp(logpost)


def bayes_estimate(hist: PhotonHistogram | np.ndarray, params: ReceiverParams, prior=None,
                   points: int = BAYES_GRID_POINTS, tol: float = 1e-9, loglik=None):
    """Circular-mean phase estimate from the grid posterior.

    Accepts a single histogram or a stack of count arrays. Raises
    :class:`UndefinedEstimate` when the posterior's resultant length is
    below ``tol`` (for example, no data and a uniform prior).
    """
    counts = hist.counts if isinstance(hist, PhotonHistogram) else np.asarray(hist)
    post = bayes_posterior(counts, params, prior, points, loglik)
    phi = PhaseGrid(points).phi
    resultant = post @ np.exp(1j * phi)
    if np.any(np.abs(resultant) < tol):
        raise UndefinedEstimate("posterior has no preferred phase")
    est = np.angle(resultant)
    return float(est) if np.ndim(est) == 0 else est
