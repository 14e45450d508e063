"""Monte Carlo calibration of the sine-cosine estimator.

Three steps, each on simulated 500-pulse windows at known offsets:

1. weight ``r``: with f = 1, minimise the mean |<phi_i> - phi_off| at the
   two ends of the capture range;
2. bias factor ``f``: with r fixed, minimise chi^2 of <phi_i> against
   phi_off across the range;
3. gain curve ``g``: smoothing spline through phi_off / <phi_i> versus
   <phi_i>, stored as knots and evaluated by linear interpolation with
   constant extrapolation.

The simulated column means do not depend on r, f or g, so one sweep over
offsets can serve all three steps (:func:`simulate_sweep`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import make_smoothing_spline

from .channel import amplitude_noise
from .estimator import (WINDOW_PULSES, bayes_estimate, bayes_log_likelihood, column_means,
                        histogram_counts, sincos_from_means)
from .physics import ReceiverParams
from .receiver import random_symbols, simulate_pulses

CAPTURE_RANGE = 0.6
DAC_BITS = 8
R_GRID = np.round(np.arange(0.05, 1.0 + 1e-9, 0.005), 3)
F_GRID = np.round(np.arange(0.5, 1.5 + 1e-9, 0.005), 3)
N_OFFSETS = 25
# Extra offsets between zero and the first grid point, as fractions of the
# grid step. The mean estimate is steepest there and the gain fit needs it.
INNER_FRACTIONS = (0.2, 0.4, 0.6, 0.8)
# |<phi_i>| below this is excluded from the gain fit (ratio is 0/0 at the origin)
GAIN_EXCLUSION = 0.01

# (n_avg, f_opt, r_opt) per mean photon number from the laboratory calibration
PUBLISHED = {2.0: (40, 1.210, 0.250), 5.0: (20, 0.895, 0.333), 10.0: (4, 0.650, 0.250)}


class CalibrationError(RuntimeError):
    """Calibration objective is flat or ill-defined; carries the scanned curve."""

    def __init__(self, message, grid=None, objective=None):
        super().__init__(message)
        self.grid = grid
        self.objective = objective


@dataclass
class Calibration:
    r_opt: float
    f_opt: float
    gain_knots: list = field(default_factory=list)
    n_avg: int = 20
    capture_range: float = CAPTURE_RANGE
    dac_bits: int = DAC_BITS
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.r_opt > 0 and self.f_opt > 0):
            raise ValueError("r_opt and f_opt must be positive")
        if self.n_avg < 1:
            raise ValueError("n_avg must be >= 1")
        if not self.capture_range > 0:
            raise ValueError("capture_range must be positive")
        self.gain_knots = [(float(x), float(g)) for x, g in self.gain_knots]
        xs = [x for x, _ in self.gain_knots]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("gain knots must be strictly increasing in <phi_i>")

    def gain(self, x):
        """Gain g(<phi_i>); identically 1 when no knots are stored."""
        if not self.gain_knots:
            return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0
        xs, gs = np.array(self.gain_knots).T
        out = np.interp(x, xs, gs)
        return float(out) if np.ndim(out) == 0 else out

    def with_unit_gain(self) -> "Calibration":
        return Calibration(self.r_opt, self.f_opt, [], self.n_avg, self.capture_range,
                           self.dac_bits, dict(self.metadata))

    @classmethod
    def published(cls, mean_photon_number: float, n_avg: int | None = None) -> "Calibration":
        """Tabulated r and f with unit gain."""
        try:
            navg, f, r = PUBLISHED[float(mean_photon_number)]
        except KeyError:
            raise KeyError(f"no published calibration for |alpha|^2={mean_photon_number}") from None
        return cls(r, f, [], n_avg or navg, metadata={"source": "published"})

    def to_dict(self) -> dict:
        return {
            "schema": "phasetrack.calibration/1",
            "r_opt": self.r_opt,
            "f_opt": self.f_opt,
            "gain_knots": [list(k) for k in self.gain_knots],
            "n_avg": self.n_avg,
            "capture_range": self.capture_range,
            "dac_bits": self.dac_bits,
            **self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Calibration":
        known = {"schema", "r_opt", "f_opt", "gain_knots", "n_avg", "capture_range", "dac_bits"}
        meta = {k: v for k, v in d.items() if k not in known}
        return cls(d["r_opt"], d["f_opt"], d.get("gain_knots", []), d.get("n_avg", 20),
                   d.get("capture_range", CAPTURE_RANGE), d.get("dac_bits", DAC_BITS), meta)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Calibration":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class OffsetSweep:
    """Window histograms ``counts[k, w]`` (shape (n+1, 4)) simulated at ``offsets[k]``."""

    offsets: np.ndarray
    counts: np.ndarray
    params: ReceiverParams

    @property
    def means(self) -> np.ndarray:
        return column_means(self.counts)

    def subset(self, idx) -> "OffsetSweep":
        return OffsetSweep(self.offsets[idx], self.counts[idx], self.params)

    def bayes(self, chunk: int = 2048) -> np.ndarray:
        """Bayesian estimate per window, shape (offsets, windows)."""
        ll = bayes_log_likelihood(self.params)
        K, W = self.counts.shape[:2]
        flat = self.counts.reshape((K * W,) + self.counts.shape[2:])
        out = np.empty(K * W)
        # chunked so the (windows, grid) posterior stays small
        for s in range(0, K * W, chunk):
            out[s:s + chunk] = bayes_estimate(flat[s:s + chunk], self.params, loglik=ll)
        return out.reshape(K, W)

    def phi_i(self, r: float, f: float) -> np.ndarray:
        return sincos_from_means(self.means, f * self.params.interference_scale, r)

    def averaged(self, r: float, f: float, n_avg: int) -> np.ndarray:
        """<phi_i> realisations, shape (offsets, windows // n_avg)."""
        phi = self.phi_i(r, f)
        K, W = phi.shape
        usable = (W // n_avg) * n_avg
        if usable == 0:
            raise ValueError("fewer windows than n_avg")
        return np.nanmean(phi[:, :usable].reshape(K, -1, n_avg), axis=2)


def simulate_sweep(params: ReceiverParams, offsets, windows: int, rng: np.random.Generator,
                   use_truth: bool = False, chunk_windows: int = 200,
                   amp_noise: float = 0.0) -> OffsetSweep:
    """Simulate ``windows`` 500-pulse windows at each offset.

    ``amp_noise`` draws a fresh energy multiplier N(1, amp_noise) per pulse.
    """
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    counts = np.empty((offsets.size, windows, params.pnr_cap + 1, 4), dtype=np.int32)
    for k, phi in enumerate(offsets):
        done = 0
        while done < windows:
            g = min(chunk_windows, windows - done)
            n = g * WINDOW_PULSES
            truth = random_symbols(n, rng)
            scale = amplitude_noise(amp_noise, n, rng) if amp_noise > 0 else 1.0
            batch = simulate_pulses(truth, phi, params, rng, scale)
            counts[k, done:done + g] = histogram_counts(batch, params.pnr_cap, use_truth, groups=g)
            done += g
    return OffsetSweep(offsets, counts, params)


def default_offsets(capture_range: float = CAPTURE_RANGE, n: int = N_OFFSETS,
                    inner: bool = True) -> np.ndarray:
    """The n-point grid over the capture range, plus the inner offsets near zero.

    r and f are fitted on the regular grid only (see :func:`grid_subset`);
    the inner offsets serve the gain fit.
    """
    grid = np.linspace(-capture_range, capture_range, n)
    if not inner:
        return grid
    step = 2 * capture_range / (n - 1)
    extra = step * np.asarray(INNER_FRACTIONS)
    return np.union1d(grid, np.concatenate([-extra, extra]))


def grid_subset(sweep: "OffsetSweep", capture_range: float = CAPTURE_RANGE,
                n: int = N_OFFSETS) -> "OffsetSweep":
    """The part of ``sweep`` lying on the regular n-point grid."""
    grid = np.linspace(-capture_range, capture_range, n)
    on_grid = np.isclose(sweep.offsets[:, None], grid[None, :], atol=1e-9).any(axis=1)
    return sweep if on_grid.all() or not on_grid.any() else sweep.subset(np.flatnonzero(on_grid))


def _require_interference(params: ReceiverParams, grid, what):
    # zero visibility (or no light) leaves no phase-dependent swing to normalise by
    if not params.interference_scale > 0:
        raise CalibrationError(f"{what} objective is undefined: no interference signal "
                               "(visibility, efficiency or energy is zero)",
                               grid, np.full(len(grid), np.nan))


def _check_flat(grid, objective, what):
    obj = np.asarray(objective)
    if not np.all(np.isfinite(obj)) or np.ptp(obj) < 1e-12:
        raise CalibrationError(f"{what} objective is flat or undefined; no phase information",
                               grid, obj)


def r_objective(sweep: OffsetSweep, n_avg: int, r_grid=R_GRID) -> np.ndarray:
    """Mean |<phi_i> - phi_off| at the sweep's end points for each r (f = 1)."""
    sub = sweep.subset([0, len(sweep.offsets) - 1])
    out = np.empty(len(r_grid))
    for i, r in enumerate(r_grid):
        avg = sub.averaged(r, 1.0, n_avg)
        out[i] = np.nanmean(np.abs(avg - sub.offsets[:, None]))
    return out


def f_objective(sweep: OffsetSweep, r_opt: float, n_avg: int = 1, f_grid=F_GRID) -> np.ndarray:
    """chi^2 of the mean <phi_i> against phi_off for each f."""
    out = np.empty(len(f_grid))
    for i, f in enumerate(f_grid):
        avg = sweep.averaged(r_opt, f, n_avg)
        m = np.nanmean(avg, axis=1)
        se2 = np.nanvar(avg, axis=1, ddof=1) / np.sum(np.isfinite(avg), axis=1)
        out[i] = np.sum((m - sweep.offsets) ** 2 / np.maximum(se2, 1e-12))
    return out


def calibrate_r(params: ReceiverParams, n_avg: int, mc_trials: int, rng: np.random.Generator,
                capture_range: float = CAPTURE_RANGE, sweep: OffsetSweep | None = None) -> float:
    """Weight r minimising the end-point deviation; ``mc_trials`` counts <phi_i> samples."""
    _require_interference(params, R_GRID, "r")
    if sweep is None:
        sweep = simulate_sweep(params, [-capture_range, capture_range], mc_trials * n_avg, rng)
    obj = r_objective(sweep, n_avg)
    _check_flat(R_GRID, obj, "r")
    return float(R_GRID[int(np.nanargmin(obj))])


def calibrate_f(params: ReceiverParams, r_opt: float, mc_trials: int, rng: np.random.Generator,
                n_avg: int = 1, capture_range: float = CAPTURE_RANGE,
                sweep: OffsetSweep | None = None) -> float:
    """Bias factor f minimising chi^2; ``mc_trials`` counts windows per offset."""
    _require_interference(params, F_GRID, "f")
    if sweep is None:
        sweep = simulate_sweep(params, default_offsets(capture_range), mc_trials, rng)
    obj = f_objective(grid_subset(sweep, capture_range), r_opt, n_avg)
    _check_flat(F_GRID, obj, "f")
    return float(F_GRID[int(np.nanargmin(obj))])


def difference_ratio(params: ReceiverParams, pulses: int, rng: np.random.Generator,
                     use_truth: bool = False) -> tuple[float, float]:
    """E[<n>_pi - <n>_0 | phi_off=0] / (4 eta xi |alpha|^2 / N) and its standard error.

    A cross-check on f_opt that does not go through the phase estimator.
    """
    windows = max(1, pulses // WINDOW_PULSES)
    sweep = simulate_sweep(params, [0.0], windows, rng, use_truth)
    diff = (sweep.means[0, :, 2] - sweep.means[0, :, 0]) / params.interference_scale
    diff = diff[np.isfinite(diff)]
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(diff.size))


def gain_samples(sweep: OffsetSweep, r_opt: float, f_opt: float, n_avg: int,
                 exclusion: float = GAIN_EXCLUSION):
    """Points (<phi_i>, phi_off / <phi_i>) used for the gain fit, plus their errors."""
    return ratio_samples(sweep.offsets, sweep.averaged(r_opt, f_opt, n_avg), exclusion)


def ratio_samples(offsets, estimates, exclusion: float = GAIN_EXCLUSION):
    """(mean estimate, offset / mean estimate, error) per offset, sorted, near-zero dropped."""
    avg = np.asarray(estimates)
    m = np.nanmean(avg, axis=1)
    se = np.nanstd(avg, axis=1, ddof=1) / np.sqrt(np.sum(np.isfinite(avg), axis=1))
    keep = (np.abs(m) >= exclusion) & (np.asarray(offsets) != 0)
    x, phi, se = m[keep], np.asarray(offsets)[keep], se[keep]
    y = phi / x
    # propagated uncertainty of the ratio
    sy = np.abs(y) * se / np.abs(x)
    order = np.argsort(x)
    return x[order], y[order], sy[order]


def fit_gain(x, y, sy=None, n_knots: int = 41) -> list:
    """Smoothing spline (GCV-chosen roughness) of the ratio, sampled into knots."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 5:
        raise CalibrationError("too few gain samples outside the exclusion window")
    if np.any(np.diff(x) <= 0):
        # non-monotone estimator means; average duplicates and re-sort
        ux, inv = np.unique(np.round(x, 12), return_inverse=True)
        y = np.bincount(inv, y) / np.bincount(inv)
        x = ux
        sy = None
    w = None
    if sy is not None:
        w = 1.0 / np.maximum(np.asarray(sy), 1e-6) ** 2
        w = w / w.mean()
    spline = make_smoothing_spline(x, y, w=w)
    xs = np.linspace(x[0], x[-1], n_knots)
    if x[0] < 0 < x[-1]:
        # No samples exist between the innermost points either side of zero
        # (the zero offset has no defined ratio). The ratio is bridged
        # linearly there instead of trusting the spline's free-running shape.
        lo, hi = x[x < 0].max(), x[x > 0].min()
        xs = np.union1d(xs[(xs <= lo) | (xs >= hi)], [lo, hi])
    return [(float(a), float(spline(a))) for a in xs]


def calibrate_gain(params: ReceiverParams, r_opt: float, f_opt: float, mc_trials: int,
                   rng: np.random.Generator, n_avg: int = 20,
                   capture_range: float = CAPTURE_RANGE,
                   sweep: OffsetSweep | None = None) -> list:
    """Gain knots; ``mc_trials`` counts <phi_i> samples per offset."""
    if sweep is None:
        sweep = simulate_sweep(params, default_offsets(capture_range), mc_trials * n_avg, rng)
    x, y, sy = gain_samples(sweep, r_opt, f_opt, n_avg)
    return fit_gain(x, y, sy)


def calibrate(params: ReceiverParams, n_avg: int, windows: int, rng: np.random.Generator,
              capture_range: float = CAPTURE_RANGE, dac_bits: int = DAC_BITS,
              seed=None, sweep: "OffsetSweep | None" = None) -> Calibration:
    """All three steps on a shared sweep of ``windows`` windows per offset.

    Passing ``sweep`` reuses an existing offset sweep, which lets several
    n_avg values be calibrated from one set of simulated windows.
    """
    if sweep is None:
        sweep = simulate_sweep(params, default_offsets(capture_range), windows, rng)
    r = calibrate_r(params, n_avg, 0, rng, capture_range, sweep=sweep)
    f = calibrate_f(params, r, 0, rng, n_avg, capture_range, sweep=sweep)
    knots = calibrate_gain(params, r, f, 0, rng, n_avg, capture_range, sweep=sweep)
    meta = {"params": params.to_dict(), "seed": seed, "windows_per_offset": sweep.counts.shape[1],
            "offsets": len(sweep.offsets)}
    return Calibration(r, f, knots, n_avg, capture_range, dac_bits, meta)


def calibrate_bayes_gain(params: ReceiverParams, windows: int, rng: np.random.Generator,
                         capture_range: float = CAPTURE_RANGE,
                         sweep: OffsetSweep | None = None) -> list:
    """Gain knots linearising the single-window Bayesian estimate.

    Same spline construction as the sine-cosine gain, applied to the mean
    Bayesian estimate at each offset.
    """
    if sweep is None:
        sweep = simulate_sweep(params, default_offsets(capture_range), windows, rng)
    x, y, sy = ratio_samples(sweep.offsets, sweep.bayes())
    return fit_gain(x, y, sy)


def apply_gain(knots: list, estimate):
    """g(estimate) * estimate with g interpolated from ``knots``."""
    xs, gs = np.array(knots).T
    return np.interp(estimate, xs, gs) * np.asarray(estimate)
