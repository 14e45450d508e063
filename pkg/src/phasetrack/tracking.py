"""Closed-loop phase tracking driven by the discrimination data.

Every 500 pulses the sine-cosine estimator turns the window's histogram
into one phi_i. After ``n_avg`` of them the gained average phi_est is
added to the LO correction target, which is clamped to the capture range
(or wrapped, for a full +-pi range) and quantised to the DAC lattice
before it reaches the LO. The receiver then sees the offset
``phi_app - lo_applied``.

The correction target accumulates in full precision; only the value sent
to the LO is quantised. The new LO value takes effect on the pulse after
the estimate is formed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import Calibration
from .channel import F_EXPT, NoiseSpec, NoiseTrajectory, build_trajectory
from .estimator import (WINDOW_PULSES, EstimationUnavailable, PhotonHistogram,
                        sincos_final, sincos_phi_i)
from .physics import QPSKSymbol, ReceiverParams, qnl_qpsk
from .receiver import DetectionRecord, random_symbols, simulate_pulses

PE_BIN_SECONDS = 0.5


def quantize(phi: float, bits: int, range_: float) -> float:
    """Nearest point of the 2R/2^bits lattice, clamped to [-R, R]."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    step = 2.0 * range_ / 2 ** bits
    q = np.rint(np.asarray(phi) / step) * step
    out = np.clip(q, -range_, range_)
    return float(out) if np.ndim(out) == 0 else out


def wrap_phase(phi):
    return (np.asarray(phi) + np.pi) % (2 * np.pi) - np.pi


@dataclass
class TrackerState:
    pnr_cap: int = 3
    lo_target: float = 0.0
    lo_correction: float = 0.0
    pending_phi_i: list = field(default_factory=list)
    current_histogram: PhotonHistogram = None
    pulses_in_window: int = 0
    enabled: bool = True
    wrap: bool = False
    last_estimate: float = float("nan")
    last_target: float = float("nan")

    def __post_init__(self):
        if self.current_histogram is None:
            self.current_histogram = PhotonHistogram.empty(self.pnr_cap)

    def feed_forward(self, phi_est: float, calib: Calibration) -> None:
        """Accumulate an estimate into the LO correction.

        ``last_estimate`` keeps the increment, ``last_target`` the cumulative
        phase estimate before clamping (what a 0.9 rad walk would read as
        0.9 even though only 0.6 is forwarded).
        """
        self.last_estimate = phi_est
        R = calib.capture_range
        target = self.lo_target + phi_est
        self.last_target = target
        if self.wrap:
            target = float(wrap_phase(target))
            self.lo_target = target
            self.lo_correction = float(wrap_phase(quantize(target, calib.dac_bits, math.pi)))
        else:
            self.lo_target = float(np.clip(target, -R, R))
            self.lo_correction = quantize(self.lo_target, calib.dac_bits, R)

    def close_window(self, params: ReceiverParams, calib: Calibration) -> bool:
        """Turn the window's histogram into phi_i if every column has data.

        Returns False (and keeps accumulating) when the estimate is not yet
        available.
        """
        try:
            phi_i = sincos_phi_i(self.current_histogram, params, calib)
        except EstimationUnavailable:
            return False
        self.pending_phi_i.append(phi_i)
        self.current_histogram.reset()
        self.pulses_in_window = 0
        if len(self.pending_phi_i) >= calib.n_avg:
            self.feed_forward(sincos_final(self.pending_phi_i, calib), calib)
            self.pending_phi_i.clear()
        return True


def step_pulse(state: TrackerState, truth: QPSKSymbol, phi_app: float, amp_scale: float,
               params: ReceiverParams, calib: Calibration,
               rng: np.random.Generator) -> tuple[TrackerState, DetectionRecord]:
    """Discriminate one pulse and advance the tracking loop."""
    from .receiver import discriminate

    phi_seen = phi_app - state.lo_correction
    rec = discriminate(truth, phi_seen, params, rng, amp_scale)
    if state.enabled:
        state.current_histogram.add_record(rec)
        state.pulses_in_window += 1
        if state.pulses_in_window >= WINDOW_PULSES:
            state.close_window(params, calib)
    return state, rec


@dataclass
class ScenarioResult:
    """Outcome of one closed-loop run.

    Per-bin arrays (``bin_time``, ``pe``, ``phi_app_mean``) use 0.5 s bins.
    Per-correction arrays (``estimate_*``, ``phi_est``, ``phi_est_ff``) hold
    one entry per feed-forward: the cumulative estimate before clamping and
    the value actually sent to the LO. ``lo_applied`` and ``residual`` are
    per pulse.
    """

    bin_time: np.ndarray
    pe: np.ndarray
    phi_app_mean: np.ndarray
    estimate_time: np.ndarray
    estimate_phi_app: np.ndarray
    phi_est: np.ndarray
    phi_est_ff: np.ndarray
    lo_applied: np.ndarray = None
    residual: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def bin_rows(self):
        """One row per P_E bin: t, P_E, mean phi_app, last phi_est, LO value at bin end."""
        rows = []
        j = 0
        last_est = float("nan")
        for t, pe, pa, lo in zip(self.bin_time, self.pe, self.phi_app_mean, self.bin_lo):
            # a correction made at the bin's closing edge acts from the next bin on
            while j < len(self.estimate_time) and self.estimate_time[j] < t + PE_BIN_SECONDS / 2 - 1e-9:
                last_est = self.phi_est[j]
                j += 1
            rows.append((t, pe, pa, last_est, lo))
        return rows

    @property
    def bin_lo(self):
        return self.metadata.get("bin_lo", np.zeros_like(self.bin_time))


def _pe_bins(correct: np.ndarray, phi: np.ndarray, f_expt: float):
    per_bin = int(round(PE_BIN_SECONDS * f_expt))
    nb = len(correct) // per_bin
    c = correct[: nb * per_bin].reshape(nb, per_bin)
    p = phi[: nb * per_bin].reshape(nb, per_bin)
    t = (np.arange(nb) + 0.5) * PE_BIN_SECONDS
    return t, 1.0 - c.mean(axis=1), p.mean(axis=1), per_bin


def run_trajectory(traj: NoiseTrajectory, params: ReceiverParams, calib: Calibration,
                   rng: np.random.Generator, f_expt: float = F_EXPT, tracking: bool = True,
                   tracking_start: float = 0.0, wrap: bool = False) -> ScenarioResult:
    """Simulate the loop over a given trajectory.

    Works in 500-pulse blocks (the LO value is constant inside one) and
    falls back to single pulses while a window waits for an empty column.
    """
    n = len(traj)
    correct = np.empty(n, dtype=bool)
    lo_applied = np.zeros(n)
    state = TrackerState(pnr_cap=params.pnr_cap, wrap=wrap, enabled=False)
    est_t, est_app, est_raw, est_ff = [], [], [], []
    start_pulse = int(round(tracking_start * f_expt)) if tracking else n
    i = 0
    while i < n:
        if not state.enabled and i >= start_pulse:
            state.enabled = True
        if state.enabled:
            size = WINDOW_PULSES - state.pulses_in_window
            if size <= 0:
                size = 1
        else:
            size = min(WINDOW_PULSES, start_pulse - i) if start_pulse > i else WINDOW_PULSES
        size = min(size, n - i)
        sl = slice(i, i + size)
        truth = random_symbols(size, rng)
        batch = simulate_pulses(truth, traj.phi_app[sl] - state.lo_correction, params, rng,
                                traj.amp_scale[sl])
        correct[sl] = batch.correct
        lo_applied[sl] = state.lo_correction
        i += size
        if state.enabled:
            state.current_histogram.add_batch(batch)
            state.pulses_in_window += size
            if state.pulses_in_window >= WINDOW_PULSES:
                n_pending = len(state.pending_phi_i)
                if state.close_window(params, calib) and n_pending + 1 >= calib.n_avg:
                    est_t.append(i / f_expt)
                    est_app.append(traj.phi_app[i - 1])
                    est_raw.append(state.last_target)
                    est_ff.append(state.lo_correction)
    t, pe, pa, per_bin = _pe_bins(correct, traj.phi_app, f_expt)
    nb = len(t)
    bin_lo = lo_applied[per_bin - 1: nb * per_bin: per_bin] if nb else np.zeros(0)
    return ScenarioResult(
        bin_time=t, pe=pe, phi_app_mean=pa,
        estimate_time=np.array(est_t), estimate_phi_app=np.array(est_app),
        phi_est=np.array(est_raw), phi_est_ff=np.array(est_ff),
        lo_applied=lo_applied, residual=traj.phi_app - lo_applied,
        metadata={"bin_lo": bin_lo, "tracking": tracking, "tracking_start": tracking_start,
                  "params": params.to_dict(), "calibration": calib.to_dict(), "f_expt": f_expt,
                  "qnl": qnl_qpsk(params.mean_photon_number)},
    )


def scenario_streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (trajectory, simulation) generators from one seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def run_scenario(noise: NoiseSpec, params: ReceiverParams, calib: Calibration, duration: float,
                 f_expt: float = F_EXPT, rng=None, *, seed=None, tracking: bool = True,
                 tracking_start: float = 0.0, wrap: bool = False) -> ScenarioResult:
    """Build the noise trajectory and run the loop over ``duration`` seconds.

    Pass either ``seed`` (trajectory and detections then use separate
    streams, so :func:`run_trajectory` on an exported trajectory with the
    simulation stream reproduces the run) or an explicit ``rng`` used for
    both.
    """
    if rng is None:
        traj_rng, sim_rng = scenario_streams(seed)
    else:
        traj_rng = sim_rng = rng
    traj = build_trajectory(noise, duration, f_expt, traj_rng)
    res = run_trajectory(traj, params, calib, sim_rng, f_expt, tracking, tracking_start, wrap)
    res.metadata.update({"seed": seed, "noise": noise.to_dict(), "duration": duration})
    return res


def _ensemble_member(args):
    noise, params, calib, duration, f_expt, seed, tracking, tracking_start, wrap = args
    return run_scenario(noise, params, calib, duration, f_expt, seed=seed, tracking=tracking,
                        tracking_start=tracking_start, wrap=wrap)


def run_ensemble(noise: NoiseSpec, params: ReceiverParams, calib: Calibration, duration: float,
                 members: int, seed: int, f_expt: float = F_EXPT, tracking: bool = True,
                 tracking_start: float = 0.0, wrap: bool = False,
                 jobs: int = 1) -> list[ScenarioResult]:
    """Independent scenario runs with seeds spawned from ``seed``; ordered by member."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(members)
    tasks = [(noise, params, calib, duration, f_expt, c, tracking, tracking_start, wrap)
             for c in children]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_ensemble_member, tasks))
    return [_ensemble_member(t) for t in tasks]


@dataclass
class VarianceRow:
    n_avg: int
    sigma2_0: float
    sigma2_delta: float
    sigma2_rw: float
    sigma2_etot: float
    sigma2_0_spread: float
    sigma2_delta_spread: float


def _residual_variance(res: ScenarioResult, settle_pulses: int) -> float:
    r = res.residual[settle_pulses:]
    return float(np.var(r))


def variance_analysis(params: ReceiverParams, calibs: dict, noise: NoiseSpec, seed: int,
                      duration: float = 60.0, runs: int = 5, f_expt: float = F_EXPT,
                      jobs: int = 1) -> list[VarianceRow]:
    """Tracking error variance versus n_avg, with and without the walk.

    For each n_avg the residual phi_app - lo_applied is sampled per pulse
    after the first correction. sigma2_0 comes from noise-free runs,
    sigma2_delta from runs with ``noise``; sigma2_rw is the walk variance
    accumulated over one estimation period, sigma_1^2 f_rw 500 n_avg / f_expt.
    Spreads are standard deviations over the ``runs`` repetitions.
    """
    rows = []
    quiet = NoiseSpec(kind="constant", phi_const=0.0)
    seeds = np.random.SeedSequence(seed).spawn(len(calibs))
    for (n_avg, calib), ss in zip(sorted(calibs.items()), seeds):
        s_quiet, s_noisy = ss.spawn(2)
        settle = WINDOW_PULSES * n_avg
        quiet_runs = run_ensemble(quiet, params, calib, duration, runs, s_quiet, f_expt, jobs=jobs)
        noisy_runs = run_ensemble(noise, params, calib, duration, runs, s_noisy, f_expt, jobs=jobs)
        v0 = np.array([_residual_variance(r, settle) for r in quiet_runs])
        vd = np.array([_residual_variance(r, settle) for r in noisy_runs])
        rw = noise.sigma_1 ** 2 * noise.f_rw * WINDOW_PULSES * n_avg / f_expt
        rows.append(VarianceRow(n_avg, float(v0.mean()), float(vd.mean()), rw,
                                float(v0.mean() + rw), float(v0.std(ddof=1)) if runs > 1 else 0.0,
                                float(vd.std(ddof=1)) if runs > 1 else 0.0))
    return rows
