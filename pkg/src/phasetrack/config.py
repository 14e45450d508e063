"""Experiment configuration: a versioned JSON document per run.

A config names the experiment (one of the CLI subcommands), carries the
receiver and channel parameters, says where the calibration comes from
and fixes the seed. Everything is validated up front so a bad value is
reported field by field before any simulation starts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .calibration import CAPTURE_RANGE, Calibration, calibrate, default_offsets
from .channel import F_EXPT, NoiseSpec
from .physics import ReceiverParams

SCHEMA = "phasetrack.experiment/1"

EXPERIMENTS = ("qnl", "sweep-offset", "calibrate", "track-constant", "track-walk",
               "variance-scan", "bandwidth-scan", "amplitude-scan", "replay")

# Allowed keys in ``options`` per experiment, with the accepted Python types.
OPTION_TYPES = {
    "qnl": {"mpn_values": list},
    "sweep-offset": {"offsets": (list, dict), "mpn_values": list, "windows": int,
                     "calibration_windows": int},
    "calibrate": {"cases": list, "windows": int},
    "track-constant": {"phi_values": list, "calibration_windows": int,
                       "export_trajectories": bool},
    "track-walk": {"compare_untracked": bool, "calibration_windows": int, "write_members": bool,
                   "export_trajectories": bool},
    "variance-scan": {"n_avg_values": list, "runs": int, "calibration_windows": int},
    "bandwidth-scan": {"f_rw_values": list, "calibration_windows": int},
    "amplitude-scan": {"sigma_amp_values": list, "trials": int, "windows": int,
                       "calibration_windows": int},
    "replay": {"trajectory": str, "spawn_key": list, "calibration_windows": int},
}

DEFAULT_CALIBRATION_WINDOWS = 1000


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists one message per offending field."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    name: str
    experiment: str
    params: ReceiverParams = field(default_factory=ReceiverParams)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    calibration: str | dict | None = None
    n_avg: int = 20
    duration: float = 60.0
    f_expt: float = F_EXPT
    ensemble: int = 1
    seed: int | None = None
    output_dir: str | None = None
    tracking: bool = True
    tracking_start: float = 0.0
    wrap: bool = False
    figure: str | None = None
    options: dict = field(default_factory=dict)
    source: Path | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        errs = self.validation_errors()
        if errs:
            raise ConfigError(errs)

    @property
    def stochastic(self) -> bool:
        return self.experiment != "qnl"

    def validation_errors(self) -> list[str]:
        errs = []
        if not isinstance(self.name, str) or not self.name:
            errs.append("name: must be a non-empty string")
        if self.experiment not in EXPERIMENTS:
            errs.append(f"experiment: must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.stochastic and self.seed is None:
            errs.append("seed: required for stochastic experiments")
        if self.seed is not None and (not isinstance(self.seed, int) or isinstance(self.seed, bool)
                                      or self.seed < 0):
            errs.append(f"seed: must be a non-negative integer, got {self.seed!r}")
        if not _is_int(self.n_avg) or self.n_avg < 1:
            errs.append(f"n_avg: must be an integer >= 1, got {self.n_avg!r}")
        if not _is_num(self.duration) or self.duration <= 0:
            errs.append(f"duration: must be > 0 s, got {self.duration!r}")
        if not _is_num(self.f_expt) or self.f_expt <= 0:
            errs.append(f"f_expt: must be > 0 Hz, got {self.f_expt!r}")
        elif self.noise.kind in ("random_walk", "composite") and self.noise.f_rw > self.f_expt:
            errs.append(f"noise.f_rw: must not exceed f_expt ({self.f_expt}), got {self.noise.f_rw}")
        if not _is_int(self.ensemble) or self.ensemble < 1:
            errs.append(f"ensemble: must be an integer >= 1, got {self.ensemble!r}")
        if not _is_num(self.tracking_start) or self.tracking_start < 0:
            errs.append(f"tracking_start: must be >= 0 s, got {self.tracking_start!r}")
        if self.calibration is not None and not isinstance(self.calibration, (str, dict)):
            errs.append("calibration: must be a path, an inline object or null")
        if isinstance(self.calibration, dict):
            errs.extend(_calibration_ref_errors(self.calibration))
        if not isinstance(self.options, dict):
            errs.append("options: must be an object")
        elif self.experiment in OPTION_TYPES:
            allowed = OPTION_TYPES[self.experiment]
            for key, val in self.options.items():
                if key not in allowed:
                    errs.append(f"options.{key}: not used by {self.experiment!r} "
                                f"(allowed: {sorted(allowed)})")
                elif not isinstance(val, allowed[key]) or (allowed[key] is int and isinstance(val, bool)):
                    errs.append(f"options.{key}: wrong type {type(val).__name__}")
            if self.experiment == "replay" and "trajectory" not in self.options:
                errs.append("options.trajectory: replay needs a trajectory CSV path")
        return errs

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA}
        for f in fields(self):
            if f.name == "source":
                continue
            v = getattr(self, f.name)
            if f.name in ("params", "noise"):
                v = v.to_dict()
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict, source: Path | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a JSON object")
        errs = []
        if d.get("schema") != SCHEMA:
            errs.append(f"schema: expected {SCHEMA!r}, got {d.get('schema')!r}")
        names = {f.name for f in fields(cls)} - {"source"}
        errs += [f"{k}: unknown field" for k in d if k not in names and k != "schema"]
        params = _build("params", ReceiverParams, d.get("params", {}), errs)
        noise = _build("noise", NoiseSpec, d.get("noise", {}), errs)
        for req in ("name", "experiment"):
            if req not in d:
                errs.append(f"{req}: required")
        if errs:
            raise ConfigError(errs)
        kw = {k: v for k, v in d.items() if k in names and k not in ("params", "noise")}
        return cls(params=params, noise=noise, source=source, **kw)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def with_(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        for k, v in kw.items():
            d[k] = v.to_dict() if hasattr(v, "to_dict") else v
        return ExperimentConfig.from_dict(d, self.source)

    def option(self, key, default=None):
        return self.options.get(key, default)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _build(prefix, cls, d, errs):
    """Construct a frozen parameter dataclass, collecting prefixed field errors."""
    if not isinstance(d, dict):
        errs.append(f"{prefix}: must be an object")
        return None
    known = {f.name for f in fields(cls)}
    unknown = [k for k in d if k not in known]
    errs.extend(f"{prefix}.{k}: unknown field" for k in unknown)
    try:
        obj = object.__new__(cls)
        for f in fields(cls):
            object.__setattr__(obj, f.name, d.get(f.name, f.default))
        field_errs = obj.validation_errors()
    except TypeError as exc:
        errs.append(f"{prefix}: {exc}")
        return None
    errs.extend(f"{prefix}.{e}" for e in field_errs)
    if unknown or field_errs:
        return None
    return cls(**{k: v for k, v in d.items() if k in known})


def _calibration_ref_errors(ref: dict) -> list[str]:
    if "schema" in ref:
        try:
            Calibration.from_dict(ref)
        except (KeyError, TypeError, ValueError) as exc:
            return [f"calibration: invalid inline calibration ({exc})"]
        return []
    if ref.get("published"):
        return []
    if "windows" in ref:
        w = ref["windows"]
        return [] if _is_int(w) and w >= 10 else [f"calibration.windows: must be an integer >= 10, got {w!r}"]
    return ["calibration: inline object needs 'schema' (a saved calibration), "
            "'published': true, or 'windows' (compute)"]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
    return ExperimentConfig.from_dict(d, source=path)


def resolve_calibration(cfg: ExperimentConfig, rng: np.random.Generator,
                        params: ReceiverParams | None = None, n_avg: int | None = None,
                        sweep=None) -> Calibration:
    """Calibration for ``cfg`` (optionally overriding params / n_avg).

    A path is read relative to the config file; ``{"published": true}``
    takes the tabulated r and f with unit gain; ``{"windows": n}`` or no
    reference at all runs a fresh Monte Carlo calibration from ``rng``.
    """
    params = params or cfg.params
    n_avg = n_avg or cfg.n_avg
    ref = cfg.calibration
    if isinstance(ref, str):
        path = Path(ref)
        if not path.is_absolute() and cfg.source is not None and not path.exists():
            path = cfg.source.parent / path
        if not path.exists():
            raise ConfigError(f"calibration: file not found: {ref}")
        try:
            calib = Calibration.load(path)
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"calibration: cannot read {ref} ({exc})") from None
    elif isinstance(ref, dict) and "schema" in ref:
        calib = Calibration.from_dict(ref)
    elif isinstance(ref, dict) and ref.get("published"):
        try:
            calib = Calibration.published(params.mean_photon_number, n_avg)
        except KeyError as exc:
            raise ConfigError(f"calibration: {exc.args[0]}") from None
    else:
        windows = (ref or {}).get("windows") or cfg.option("calibration_windows",
                                                           DEFAULT_CALIBRATION_WINDOWS)
        return calibrate(params, n_avg, windows, rng, sweep=sweep)
    if calib.n_avg != n_avg:
        raise ConfigError(f"calibration: n_avg {calib.n_avg} does not match config n_avg {n_avg}")
    return calib


def offsets_option(spec, capture_range: float = CAPTURE_RANGE) -> np.ndarray:
    """Offsets from an explicit list, a {start, stop, num} object, or the default grid."""
    if spec is None:
        return default_offsets(capture_range, inner=False)
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except KeyError as exc:
            raise ConfigError(f"options.offsets: missing {exc.args[0]!r}") from None
    return np.asarray(spec, dtype=float)


def catalog_dir():
    return resources.files("phasetrack") / "configs"


def figure_catalog() -> list[tuple[str, Path]]:
    """(figure id, config path) for every shipped experiment config, sorted by file name."""
    out = []
    for entry in sorted(catalog_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            d = json.loads(entry.read_text())
            out.append((d.get("figure") or d["name"], Path(str(entry))))
    return out


__all__ = ["SCHEMA", "EXPERIMENTS", "ConfigError", "ExperimentConfig", "load_config",
           "resolve_calibration", "offsets_option", "figure_catalog"]
