"""Command line entry point: ``phasetrack <subcommand> [flags]``.

Each subcommand builds an :class:`ExperimentConfig` from its flags (or
loads one with ``--config`` and lets explicit flags override it), runs it
and prints a one-line summary. Exit codes: 0 success, 2 configuration
error, 3 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import SCHEMA, ConfigError, ExperimentConfig, load_config
from .harness import OUTPUT_ENV, run_experiment
from .receiver import InvariantViolation

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


def _common(p: argparse.ArgumentParser, seed=True):
    p.add_argument("--config", help="experiment config JSON; explicit flags override it")
    p.add_argument("--name", help="artifact name prefix")
    p.add_argument("--mpn", type=float, help="mean photon number |alpha|^2")
    p.add_argument("--dark-rate", type=float, help="dark counts per bin")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./phasetrack-out)")
    if seed:
        p.add_argument("--seed", type=int, help="root seed (required unless in --config)")
        p.add_argument("--navg", type=int, help="estimates averaged per correction")
        p.add_argument("--duration", type=float, help="simulated seconds")
        p.add_argument("--ensemble", type=int, help="ensemble members")
        p.add_argument("--calibration", help="calibration JSON to use instead of calibrating")
        p.add_argument("--calibration-windows", type=int,
                       help="windows per offset when calibrating on the fly")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for ensembles")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phasetrack",
                                 description="Sub-QNL QPSK receiver with phase tracking")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qnl", help="quantum noise limit and receiver error probability")
    _common(p, seed=False)
    p.add_argument("--mpn-values", type=float, nargs="+")
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("sweep-offset", help="P_E and estimator response versus fixed offset")
    _common(p)
    p.add_argument("--mpn-values", type=float, nargs="+")
    p.add_argument("--offset-range", type=float, nargs=3, metavar=("START", "STOP", "NUM"))
    p.add_argument("--windows", type=int, help="estimator samples per offset (0: P_E only)")

    p = sub.add_parser("calibrate", help="Monte Carlo calibration of r, f and the gain curve")
    _common(p)
    p.add_argument("--windows", type=int, help="500-pulse windows per offset")

    p = sub.add_parser("track-constant", help="constant offset switched on, then tracked")
    _common(p)
    p.add_argument("--phi", type=float, nargs="+", help="applied offsets (rad)")
    p.add_argument("--onset", type=float, help="offset onset time (s), default 2")
    p.add_argument("--tracking-start", type=float, help="tracking enable time (s), default 4")
    p.add_argument("--export-trajectories", action="store_true")

    p = sub.add_parser("track-walk", help="Gaussian random walk with and without tracking")
    _common(p)
    p.add_argument("--sigma1", type=float, help="walk step (rad), default 5e-3")
    p.add_argument("--frw", type=float, help="walk update rate (Hz), default 100")
    p.add_argument("--steps", type=int, help="walk steps L, default 6500")
    p.add_argument("--no-untracked", action="store_true", help="skip the untracked ensemble")
    p.add_argument("--wrap", action="store_true", help="wrap the correction on +-pi")
    p.add_argument("--write-members", action="store_true")
    p.add_argument("--export-trajectories", action="store_true")

    p = sub.add_parser("variance-scan", help="estimator variance versus n_avg")
    _common(p)
    p.add_argument("--navg-values", type=int, nargs="+")
    p.add_argument("--runs", type=int)
    p.add_argument("--sigma1", type=float)
    p.add_argument("--frw", type=float)

    p = sub.add_parser("bandwidth-scan", help="tracking under walks of different bandwidth")
    _common(p)
    p.add_argument("--frw-values", type=float, nargs="+")
    p.add_argument("--sigma1", type=float)
    p.add_argument("--onset", type=float, help="walk and tracking start (s), default 2")

    p = sub.add_parser("amplitude-scan", help="error rate and estimator variance with amplitude noise")
    _common(p)
    p.add_argument("--sigma-amp-values", type=float, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--windows", type=int, help="estimator windows per noise level (0: none)")

    p = sub.add_parser("replay", help="re-run the loop over an exported trajectory CSV")
    p.add_argument("trajectory")
    _common(p)
    p.add_argument("--spawn-key", type=int, nargs="+", help="member spawn key from the summary")
    p.add_argument("--tracking-start", type=float)
    p.add_argument("--no-tracking", action="store_true")
    return ap


def _set(d: dict, key, value):
    if value is not None:
        d[key] = value


def config_from_args(args) -> ExperimentConfig:
    cmd = args.command
    base = load_config(args.config).to_dict() if args.config else None
    if base is not None and base["experiment"] != cmd:
        raise ConfigError(f"experiment: config is {base['experiment']!r} but subcommand is {cmd!r}")
    d = base or {"schema": SCHEMA, "name": cmd, "experiment": cmd}
    d.setdefault("params", {})
    d.setdefault("noise", {})
    d.setdefault("options", {})
    fresh = base is None
    params, noise, opts = d["params"], d["noise"], d["options"]
    _set(d, "name", args.name)
    _set(params, "mean_photon_number", args.mpn)
    _set(params, "dark_rate", args.dark_rate)
    _set(d, "output_dir", args.out)
    for flag, key in (("seed", "seed"), ("navg", "n_avg"), ("duration", "duration"),
                      ("ensemble", "ensemble"), ("calibration", "calibration")):
        _set(d, key, getattr(args, flag, None))
    _set(opts, "calibration_windows", getattr(args, "calibration_windows", None))

    if cmd == "qnl":
        _set(opts, "mpn_values", args.mpn_values)
    elif cmd == "sweep-offset":
        _set(opts, "mpn_values", args.mpn_values)
        if args.offset_range:
            a, b, n = args.offset_range
            opts["offsets"] = {"start": a, "stop": b, "num": int(n)}
        _set(opts, "windows", args.windows)
    elif cmd == "calibrate":
        _set(opts, "windows", args.windows)
    elif cmd == "track-constant":
        _set(opts, "phi_values", args.phi)
        noise["kind"] = "constant"
        if fresh:
            noise.setdefault("onset_time", 2.0)
            d.setdefault("tracking_start", 4.0)
            d.setdefault("duration", 10.0)
        _set(noise, "onset_time", args.onset)
        _set(d, "tracking_start", args.tracking_start)
        if args.export_trajectories:
            opts["export_trajectories"] = True
    elif cmd == "track-walk":
        if fresh:
            noise.update({"kind": "random_walk", "sigma_1": 5e-3})
        _set(noise, "sigma_1", args.sigma1)
        _set(noise, "f_rw", args.frw)
        _set(noise, "L", args.steps)
        if fresh and "duration" not in d:
            d["duration"] = noise.get("L", 6500) / noise.get("f_rw", 100.0)
        if args.no_untracked:
            opts["compare_untracked"] = False
        if args.wrap:
            d["wrap"] = True
        if args.write_members:
            opts["write_members"] = True
        if args.export_trajectories:
            opts["export_trajectories"] = True
    elif cmd == "variance-scan":
        if fresh:
            noise.update({"kind": "random_walk", "sigma_1": 5e-3, "f_rw": 100.0})
        _set(noise, "sigma_1", args.sigma1)
        _set(noise, "f_rw", args.frw)
        _set(opts, "n_avg_values", args.navg_values)
        _set(opts, "runs", args.runs)
    elif cmd == "bandwidth-scan":
        if fresh:
            noise.update({"kind": "random_walk", "sigma_1": 5e-3, "onset_time": 2.0})
            d.setdefault("tracking_start", 2.0)
            d.setdefault("duration", 14.0)
        _set(noise, "sigma_1", args.sigma1)
        _set(noise, "onset_time", args.onset)
        if args.onset is not None:
            d["tracking_start"] = args.onset
        _set(opts, "f_rw_values", args.frw_values)
    elif cmd == "amplitude-scan":
        if fresh:
            d.setdefault("n_avg", 1)
        _set(opts, "sigma_amp_values", args.sigma_amp_values)
        _set(opts, "trials", args.trials)
        _set(opts, "windows", args.windows)
    elif cmd == "replay":
        opts["trajectory"] = args.trajectory
        if args.spawn_key:
            opts["spawn_key"] = args.spawn_key
        _set(d, "tracking_start", args.tracking_start)
        if args.no_tracking:
            d["tracking"] = False
    return ExperimentConfig.from_dict(d, source=None if base is None else
                                      load_config(args.config).source)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        doc = run_experiment(cfg, jobs=getattr(args, "jobs", 1) or 1)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"phasetrack: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"phasetrack: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    if args.command == "qnl" and args.format == "json":
        print(json.dumps(doc["qnl"] if len(doc["qnl"]) > 1 else doc["qnl"][0]))
    else:
        print(f"{cfg.name}: {doc['line']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
