"""Runners that turn an :class:`ExperimentConfig` into CSV and JSON artifacts.

Seeds are laid out as a tree under the config seed: spawn key ``(0,)``
feeds the calibration, ``(1, g)`` is group ``g`` of simulations (one
offset, one bandwidth, ...), and member ``m`` of that group's ensemble is
``(1, g, m)``. A member can therefore be rebuilt from the config seed and
its spawn key alone, which is what ``replay`` relies on.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
import warnings
from pathlib import Path

import numpy as np

from .calibration import (PUBLISHED, Calibration, apply_gain, calibrate, calibrate_bayes_gain,
                          default_offsets, simulate_sweep)
from .channel import NoiseSpec, NoiseTrajectory, build_trajectory
from .config import ConfigError, ExperimentConfig, offsets_option, resolve_calibration
from .estimator import WINDOW_PULSES
from .physics import db_below, qnl_bpsk, qnl_qpsk
from .receiver import error_rate, exact_error_probability
from .tracking import (ScenarioResult, run_ensemble, run_trajectory, scenario_streams,
                       variance_analysis)

OUTPUT_ENV = "PHASETRACK_OUTPUT_DIR"
DEFAULT_OUTPUT = "phasetrack-out"
SIG_DIGITS = 9


def calibration_seed(seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(0,))


def group_seed(seed: int, group: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(1, group))


def member_seed(seed: int, spawn_key) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key))


def fmt(v) -> str:
    """CSV cell: integers verbatim, floats at 9 significant digits, '.' decimal."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return format(float(v), f".{SIG_DIGITS}g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def safe_db(p_rx, p_base):
    try:
        return db_below(float(p_rx), float(p_base))
    except ValueError:
        return None


def output_dir(cfg: ExperimentConfig, override=None) -> Path:
    d = Path(override or cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Run:
    """Collects artifacts and summary fields for one experiment invocation."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.artifacts: list[str] = []
        self.summary: dict = {}
        self.line = ""

    def csv(self, suffix, header, rows) -> Path:
        p = write_csv(self.out / f"{self.cfg.name}_{suffix}.csv", header, rows)
        self.artifacts.append(p.name)
        return p

    def result(self, runtime: float) -> dict:
        doc = {"name": self.cfg.name, "experiment": self.cfg.experiment,
               "figure": self.cfg.figure, "seed": self.cfg.seed,
               "runtime_s": runtime, **self.summary,
               "artifacts": self.artifacts, "config": self.cfg.to_dict()}
        path = self.out / f"{self.cfg.name}_summary.json"
        doc["artifacts"] = self.artifacts + [path.name]
        path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
        doc["line"] = f"{self.line} runtime={runtime:.1f}s"
        return doc


# ----------------------------------------------------------------------------- helpers

def _calibration(cfg: ExperimentConfig, params=None, n_avg=None, want_bayes=False):
    """Sine-cosine calibration and (optionally) Bayesian gain knots."""
    rng = np.random.default_rng(calibration_seed(cfg.seed))
    params = params or cfg.params
    bayes = None
    computing = cfg.calibration is None or (isinstance(cfg.calibration, dict)
                                            and "windows" in cfg.calibration)
    windows = ((cfg.calibration or {}).get("windows") if isinstance(cfg.calibration, dict) else None) \
        or cfg.option("calibration_windows", 1000)
    sweep = None
    if computing or want_bayes:
        sweep = simulate_sweep(params, default_offsets(), windows, rng)
    calib = resolve_calibration(cfg, rng, params, n_avg, sweep=sweep)
    if want_bayes:
        bayes = calibrate_bayes_gain(params, 0, rng, sweep=sweep)
    return calib, bayes


def _scenario_rows(res: ScenarioResult):
    return res.bin_rows()


def _ensemble_rows(results: list[ScenarioResult]):
    """Ensemble-mean rows plus the 10th/90th percentile of P_E per bin."""
    rows_each = [np.array(r.bin_rows(), dtype=float) for r in results]
    stack = np.stack(rows_each)
    with warnings.catch_warnings():
        # columns that are all-NaN (no estimate yet) stay NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(stack, axis=0)
    p10 = np.percentile(stack[:, :, 1], 10, axis=0)
    p90 = np.percentile(stack[:, :, 1], 90, axis=0)
    return [tuple(m) + (a, b) for m, a, b in zip(mean, p10, p90)]


BIN_HEADER = ["t", "P_E", "phi_app_mean", "phi_est", "phi_est_ff"]


def _write_results(run: Run, tag: str, results: list[ScenarioResult], write_members=False):
    if len(results) == 1:
        run.csv(tag, BIN_HEADER, _scenario_rows(results[0]))
        return
    run.csv(tag, BIN_HEADER + ["P_E_p10", "P_E_p90"], _ensemble_rows(results))
    if write_members:
        for m, r in enumerate(results):
            run.csv(f"{tag}_m{m:03d}", BIN_HEADER, _scenario_rows(r))


def _export_trajectories(run: Run, tag: str, noise: NoiseSpec, group: int):
    """Rebuild each member's trajectory from its seed and write it as CSV."""
    cfg = run.cfg
    exported = []
    for m in range(cfg.ensemble):
        key = (1, group, m)
        traj_rng, _ = scenario_streams(member_seed(cfg.seed, key))
        traj = build_trajectory(noise, cfg.duration, cfg.f_expt, traj_rng)
        path = run.out / f"{cfg.name}_{tag}_traj_m{m:03d}.csv"
        traj.to_csv(path)
        run.artifacts.append(path.name)
        exported.append({"file": path.name, "spawn_key": list(key)})
    return exported


def _terminal(results: list[ScenarioResult], qnl: float, tail_s: float = 10.0):
    pe = np.array([r.pe for r in results])
    t = results[0].bin_time
    tail = t >= t[-1] - tail_s + 1e-9 if len(t) else np.zeros(0, bool)
    n_tail = max(1, int(round(tail_s * results[0].metadata["f_expt"])))
    res_var = [float(np.var(r.residual[-n_tail:])) for r in results]
    mean_pe = float(pe.mean())
    term_pe = float(pe[:, tail].mean()) if tail.any() else mean_pe
    return {"mean_pe": mean_pe, "mean_pe_db_below": safe_db(mean_pe, qnl),
            "terminal_pe": term_pe, "terminal_pe_db_below": safe_db(term_pe, qnl),
            "terminal_residual_var": float(np.mean(res_var)),
            "terminal_residual_var_spread": float(np.std(res_var))}


# ----------------------------------------------------------------------------- runners

def run_qnl(run: Run):
    cfg = run.cfg
    rows, entries = [], []
    for mpn in cfg.option("mpn_values", [cfg.params.mean_photon_number]):
        p = cfg.params.with_(mean_photon_number=float(mpn))
        q = qnl_qpsk(p.mean_photon_number)
        pe = exact_error_probability(p)
        rows.append((p.mean_photon_number, q, qnl_bpsk(p.mean_photon_number), pe, safe_db(pe, q)))
        entries.append({"mpn": p.mean_photon_number, "qnl_qpsk": q,
                        "qnl_bpsk": rows[-1][2], "receiver_pe": pe, "db_below": rows[-1][4]})
    run.csv("limits", ["mpn", "qnl_qpsk", "qnl_bpsk", "receiver_pe", "db_below_qnl"], rows)
    run.summary["qnl"] = entries
    e = entries[0]
    run.line = (f"qnl_qpsk({e['mpn']:g})={e['qnl_qpsk']:.6g} P_E={e['receiver_pe']:.4g} "
                f"dB_below={e['db_below']:.2f}")


def run_sweep_offset(run: Run):
    cfg = run.cfg
    offsets = offsets_option(cfg.option("offsets"))
    mpns = cfg.option("mpn_values", [cfg.params.mean_photon_number])
    rows = []
    for mpn in mpns:
        p = cfg.params.with_(mean_photon_number=float(mpn))
        q = qnl_qpsk(p.mean_photon_number)
        for phi in offsets:
            rows.append((p.mean_photon_number, phi, exact_error_probability(p, phi), q))
    run.csv("pe_vs_offset", ["mpn", "phi_off", "P_E", "qnl_qpsk"], rows)
    run.summary["mpn_values"] = [float(m) for m in mpns]
    run.line = f"P_E vs offset: {len(offsets)} offsets x {len(mpns)} powers"
    windows = cfg.option("windows", 0)
    if windows <= 0:
        return
    calib, bknots = _calibration(cfg, want_bayes=True)
    sim = np.random.default_rng(group_seed(cfg.seed, 0))
    n_avg = calib.n_avg
    sweep = simulate_sweep(cfg.params, offsets, windows * n_avg, sim)
    raw = sweep.averaged(calib.r_opt, calib.f_opt, n_avg)
    corr = calib.gain(raw) * raw
    b_raw = sweep.bayes()
    b_corr = apply_gain(bknots, b_raw)
    est_rows = []
    for k, phi in enumerate(offsets):
        est_rows.append((phi, np.nanmean(raw[k]), np.nanstd(raw[k]), np.nanmean(corr[k]),
                         np.nanstd(corr[k]), b_raw[k].mean(), b_raw[k].std(),
                         b_corr[k].mean(), b_corr[k].std()))
    run.csv("estimates", ["phi_off", "sincos_raw_mean", "sincos_raw_std", "sincos_mean",
                          "sincos_std", "bayes_raw_mean", "bayes_raw_std", "bayes_mean",
                          "bayes_std"], est_rows)
    calib.save(run.out / f"{cfg.name}_calibration.json")
    run.artifacts.append(f"{cfg.name}_calibration.json")
    run.summary.update({"estimate_samples_per_offset": windows, "n_avg": n_avg,
                        "r_opt": calib.r_opt, "f_opt": calib.f_opt})
    run.line += f"; estimator sweep with {windows} samples per offset (n_avg={n_avg})"


def run_calibrate(run: Run):
    cfg = run.cfg
    cases = cfg.option("cases", [[cfg.params.mean_photon_number, cfg.n_avg]])
    windows = cfg.option("windows", 1000)
    rows, entries = [], []
    for i, case in enumerate(cases):
        try:
            mpn, n_avg = float(case[0]), int(case[1])
        except (TypeError, ValueError, IndexError):
            raise ConfigError(f"options.cases[{i}]: expected [mean_photon_number, n_avg]") from None
        p = cfg.params.with_(mean_photon_number=mpn)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, i)))
        c = calibrate(p, n_avg, windows, rng, seed=cfg.seed)
        fname = f"{cfg.name}_mpn{mpn:g}_navg{n_avg}.json"
        c.save(run.out / fname)
        run.artifacts.append(fname)
        pub = PUBLISHED.get(mpn)
        rows.append((mpn, n_avg, c.r_opt, c.f_opt, pub[2] if pub else None, pub[1] if pub else None))
        entries.append({"mpn": mpn, "n_avg": n_avg, "r_opt": c.r_opt, "f_opt": c.f_opt,
                        "file": fname})
    run.csv("calibration", ["mpn", "n_avg", "r_opt", "f_opt", "r_published", "f_published"], rows)
    run.summary["calibrations"] = entries
    run.line = "; ".join(f"mpn={e['mpn']:g} n_avg={e['n_avg']} r_opt={e['r_opt']:.3f} "
                         f"f_opt={e['f_opt']:.3f}" for e in entries)


def run_track_constant(run: Run, jobs: int):
    cfg = run.cfg
    calib, _ = _calibration(cfg)
    q = qnl_qpsk(cfg.params.mean_photon_number)
    cycle = WINDOW_PULSES * calib.n_avg / cfg.f_expt
    entries = []
    for g, phi in enumerate(cfg.option("phi_values", [cfg.noise.phi_const])):
        noise = NoiseSpec(**{**cfg.noise.to_dict(), "kind": "constant", "phi_const": float(phi)})
        results = run_ensemble(noise, cfg.params, calib, cfg.duration, cfg.ensemble,
                               group_seed(cfg.seed, g), cfg.f_expt, cfg.tracking,
                               cfg.tracking_start, cfg.wrap, jobs)
        tag = f"phi{float(phi):+.3f}"
        _write_results(run, tag, results)
        t = results[0].bin_time
        pe = np.mean([r.pe for r in results], axis=0)
        onset = noise.onset_time
        ready = cfg.tracking_start + cycle
        pre = t + 0.25 <= onset
        mid = (t - 0.25 >= onset) & (t + 0.25 <= cfg.tracking_start)
        post = t - 0.25 >= ready
        entry = {"phi_app": float(phi),
                 "pe_before_onset": float(pe[pre].mean()) if pre.any() else None,
                 "pe_untracked": float(pe[mid].mean()) if mid.any() else None,
                 "pe_tracked": float(pe[post].mean()) if post.any() else None,
                 "first_estimates": [float(r.phi_est[0]) if len(r.phi_est) else None
                                     for r in results]}
        entry["tracked_db_below"] = safe_db(entry["pe_tracked"], q) if entry["pe_tracked"] else None
        entry["recovered"] = bool(post.any() and pe[post][0] < q)
        if cfg.option("export_trajectories", False):
            entry["trajectories"] = _export_trajectories(run, tag, noise, g)
        entries.append(entry)
    calib.save(run.out / f"{cfg.name}_calibration.json")
    run.artifacts.append(f"{cfg.name}_calibration.json")
    run.summary.update({"qnl_qpsk": q, "cycle_s": cycle, "offsets": entries})
    tracked = [e["pe_tracked"] for e in entries if e["pe_tracked"] is not None]
    worst = f"<= {max(tracked):.4g}" if tracked else "n/a (run ends before the first correction)"
    run.line = (f"{len(entries)} offsets; tracked P_E {worst} "
                f"(qnl {q:.4g}); recovered {sum(e['recovered'] for e in entries)}/{len(entries)}")


def run_track_walk(run: Run, jobs: int):
    cfg = run.cfg
    if cfg.noise.kind not in ("random_walk", "composite"):
        raise ConfigError("noise.kind: track-walk needs 'random_walk' or 'composite'")
    calib, _ = _calibration(cfg)
    q = qnl_qpsk(cfg.params.mean_photon_number)
    modes = [("tracked", True)]
    if cfg.option("compare_untracked", True):
        modes.append(("untracked", False))
    for tag, on in modes:
        # both modes reuse group 0, so the walks are paired member by member
        results = run_ensemble(cfg.noise, cfg.params, calib, cfg.duration, cfg.ensemble,
                               group_seed(cfg.seed, 0), cfg.f_expt, on, cfg.tracking_start,
                               cfg.wrap, jobs)
        _write_results(run, tag, results, cfg.option("write_members", False))
        run.summary[tag] = _terminal(results, q)
    if cfg.option("export_trajectories", False):
        run.summary["trajectories"] = _export_trajectories(run, "walk", cfg.noise, 0)
    calib.save(run.out / f"{cfg.name}_calibration.json")
    run.artifacts.append(f"{cfg.name}_calibration.json")
    run.summary["qnl_qpsk"] = q
    tr = run.summary["tracked"]
    run.line = f"tracked P_E={tr['mean_pe']:.4g} dB_below={_db_str(tr['mean_pe_db_below'])}"
    if "untracked" in run.summary:
        un = run.summary["untracked"]
        run.line += f"; untracked P_E={un['mean_pe']:.4g} dB_below={_db_str(un['mean_pe_db_below'])}"


def _db_str(db):
    return "n/a" if db is None else f"{db:.2f}"


def run_variance_scan(run: Run, jobs: int):
    cfg = run.cfg
    if cfg.noise.kind != "random_walk":
        raise ConfigError("noise.kind: variance-scan needs 'random_walk'")
    grid = [int(n) for n in cfg.option("n_avg_values", [2, 5, 10, 15, 20, 30, 40])]
    runs = cfg.option("runs", 5)
    ref = cfg.calibration
    if isinstance(ref, dict) and ref.get("published"):
        calibs = {n: Calibration.published(cfg.params.mean_photon_number, n) for n in grid}
    elif ref is None or (isinstance(ref, dict) and "windows" in ref):
        rng = np.random.default_rng(calibration_seed(cfg.seed))
        windows = (ref or {}).get("windows") or cfg.option("calibration_windows", 1000)
        sweep = simulate_sweep(cfg.params, default_offsets(), windows, rng)
        calibs = {n: calibrate(cfg.params, n, 0, rng, sweep=sweep) for n in grid}
    else:
        raise ConfigError("calibration: variance-scan needs one calibration per n_avg; "
                          "use {'windows': n} or {'published': true}")
    rows = variance_analysis(cfg.params, calibs, cfg.noise, group_seed(cfg.seed, 0),
                             cfg.duration, runs, cfg.f_expt, jobs)
    run.csv("variance", ["n_avg", "sigma2_0", "sigma2_delta", "sigma2_rw", "sigma2_etot",
                         "sigma2_0_spread", "sigma2_delta_spread"],
            [(r.n_avg, r.sigma2_0, r.sigma2_delta, r.sigma2_rw, r.sigma2_etot,
              r.sigma2_0_spread, r.sigma2_delta_spread) for r in rows])
    slope = float(np.polyfit(np.log([r.n_avg for r in rows]),
                             np.log([r.sigma2_0 for r in rows]), 1)[0])
    best = min(rows, key=lambda r: r.sigma2_delta).n_avg
    run.summary.update({"slope_log_sigma2_0": slope, "argmin_sigma2_delta": best,
                        "rows": [r.__dict__ for r in rows]})
    run.line = f"sigma2_0 slope={slope:.3f}; argmin sigma2_delta at n_avg={best}"


def run_bandwidth_scan(run: Run, jobs: int):
    cfg = run.cfg
    if cfg.noise.kind != "random_walk":
        raise ConfigError("noise.kind: bandwidth-scan needs 'random_walk'")
    calib, _ = _calibration(cfg)
    q = qnl_qpsk(cfg.params.mean_photon_number)
    span = cfg.duration - cfg.noise.onset_time
    entries = []
    for g, f_rw in enumerate(cfg.option("f_rw_values", [100.0, 500.0])):
        steps = max(1, int(round(float(f_rw) * span)))
        noise = NoiseSpec(**{**cfg.noise.to_dict(), "f_rw": float(f_rw), "L": steps})
        if noise.f_rw > cfg.f_expt:
            raise ConfigError(f"options.f_rw_values: {f_rw} exceeds f_expt")
        results = run_ensemble(noise, cfg.params, calib, cfg.duration, cfg.ensemble,
                               group_seed(cfg.seed, g), cfg.f_expt, cfg.tracking,
                               cfg.tracking_start, cfg.wrap, jobs)
        tag = f"frw{float(f_rw):g}"
        _write_results(run, tag, results)
        t = results[0].bin_time
        pe = np.mean([r.pe for r in results], axis=0)
        after = t - 0.25 >= noise.onset_time
        above = np.nonzero(after & (pe >= q))[0]
        below_s = (t[above[0]] - 0.25 - noise.onset_time) if above.size else span
        entries.append({"f_rw": float(f_rw), "L": steps, **_terminal(results, q),
                        "time_below_qnl_s": float(below_s)})
    run.summary.update({"qnl_qpsk": q, "bandwidths": entries})
    run.line = "; ".join(f"f_rw={e['f_rw']:g}Hz P_E={e['mean_pe']:.4g} "
                         f"below QNL for {e['time_below_qnl_s']:.1f}s" for e in entries)


def run_amplitude_scan(run: Run):
    cfg = run.cfg
    sigmas = [float(s) for s in cfg.option("sigma_amp_values", [0.0, 0.05, 0.10, 0.20, 0.25])]
    trials = cfg.option("trials", 1_000_000)
    windows = cfg.option("windows", 0)
    calib = bknots = None
    if windows > 0:
        calib, bknots = _calibration(cfg, want_bayes=True)
    q = qnl_qpsk(cfg.params.mean_photon_number)
    rows, entries = [], []
    for g, s in enumerate(sigmas):
        rng = np.random.default_rng(group_seed(cfg.seed, g))
        pe, se = error_rate(cfg.params, 0.0, trials, rng, amp_noise=s)
        v_sc = v_b = None
        if windows > 0:
            sweep = simulate_sweep(cfg.params, [0.0], windows * calib.n_avg, rng, amp_noise=s)
            x = sweep.averaged(calib.r_opt, calib.f_opt, calib.n_avg)[0]
            v_sc = float(np.nanvar(calib.gain(x) * x))
            b = sweep.bayes()[0]
            v_b = float(np.var(apply_gain(bknots, b)))
        rows.append((s, pe, se, safe_db(pe, q), v_sc, v_b))
        entries.append({"sigma_amp": s, "pe": pe, "pe_se": se, "var_sincos": v_sc,
                        "var_bayes": v_b})
    run.csv("amplitude", ["sigma_amp", "P_E", "P_E_se", "db_below_qnl", "var_sincos",
                          "var_bayes"], rows)
    run.summary.update({"qnl_qpsk": q, "trials": trials, "rows": entries})
    run.line = "; ".join(f"sigma_amp={e['sigma_amp']:g} P_E={e['pe']:.4g}" for e in entries)


def run_replay(run: Run):
    cfg = run.cfg
    path = Path(cfg.option("trajectory"))
    if not path.is_absolute() and cfg.source is not None and not path.exists():
        path = cfg.source.parent / path
    if not path.exists():
        raise ConfigError(f"options.trajectory: file not found: {cfg.option('trajectory')}")
    try:
        traj = NoiseTrajectory.from_csv(path)
    except ValueError as exc:
        raise ConfigError(f"options.trajectory: {exc}") from None
    calib, _ = _calibration(cfg)
    key = cfg.option("spawn_key")
    ss = member_seed(cfg.seed, key) if key is not None else np.random.SeedSequence(cfg.seed)
    _, sim_rng = scenario_streams(ss)
    res = run_trajectory(traj, cfg.params, calib, sim_rng, cfg.f_expt, cfg.tracking,
                         cfg.tracking_start, cfg.wrap)
    run.csv("replay", BIN_HEADER, res.bin_rows())
    q = qnl_qpsk(cfg.params.mean_photon_number)
    pe = float(res.pe.mean()) if len(res.pe) else float("nan")
    run.summary.update({"qnl_qpsk": q, "pulses": len(traj), "mean_pe": pe,
                        "mean_pe_db_below": safe_db(pe, q),
                        "spawn_key": key})
    run.line = f"replayed {len(traj)} pulses; P_E={pe:.4g} dB_below={_db_str(safe_db(pe, q))}"


RUNNERS = {
    "qnl": lambda run, jobs: run_qnl(run),
    "sweep-offset": lambda run, jobs: run_sweep_offset(run),
    "calibrate": lambda run, jobs: run_calibrate(run),
    "track-constant": run_track_constant,
    "track-walk": run_track_walk,
    "variance-scan": run_variance_scan,
    "bandwidth-scan": run_bandwidth_scan,
    "amplitude-scan": lambda run, jobs: run_amplitude_scan(run),
    "replay": lambda run, jobs: run_replay(run),
}


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> dict:
    """Run ``cfg``, write its artifacts and return the summary document."""
    t0 = time.perf_counter()
    run = Run(cfg, output_dir(cfg, out_dir))
    RUNNERS[cfg.experiment](run, max(1, int(jobs)))
    return run.result(time.perf_counter() - t0)
