"""Channel noise trajectories sampled on the pulse clock."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

F_EXPT = 12_000.0
WALK_STEPS = 6500
WALK_RATE = 100.0


@dataclass(frozen=True)
class NoiseSpec:
    """Declarative description of the channel.

    ``kind`` is one of ``constant``, ``random_walk``, ``amplitude`` or
    ``composite`` (walk plus amplitude noise). ``onset_time`` delays the
    constant offset or the start of the walk. ``drift_rate`` (rad/s) adds a
    slow linear drift on top of any kind, a crude stand-in for an
    unstabilised interferometer; it is zero unless asked for.
    """

    kind: str = "constant"
    phi_const: float = 0.0
    sigma_1: float = 0.0
    f_rw: float = WALK_RATE
    L: int = WALK_STEPS
    sigma_amp: float = 0.0
    onset_time: float = 0.0
    drift_rate: float = 0.0

    KINDS = ("constant", "random_walk", "amplitude", "composite")

    def validation_errors(self) -> list[str]:
        errs = []
        if self.kind not in self.KINDS:
            errs.append(f"kind: must be one of {self.KINDS}, got {self.kind!r}")
        if self.sigma_1 < 0:
            errs.append(f"sigma_1: must be >= 0, got {self.sigma_1!r}")
        if self.sigma_amp < 0:
            errs.append(f"sigma_amp: must be >= 0, got {self.sigma_amp!r}")
        if self.kind in ("random_walk", "composite") and not self.f_rw > 0:
            errs.append(f"f_rw: must be > 0 for walks, got {self.f_rw!r}")
        if self.L < 1:
            errs.append(f"L: must be >= 1, got {self.L!r}")
        if abs(self.phi_const) > math.pi:
            errs.append(f"phi_const: must satisfy |phi| <= pi, got {self.phi_const!r}")
        if self.onset_time < 0:
            errs.append(f"onset_time: must be >= 0, got {self.onset_time!r}")
        return errs

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("kind", "phi_const", "sigma_1", "f_rw", "L", "sigma_amp", "onset_time",
                  "drift_rate")}


@dataclass
class NoiseTrajectory:
    phi_app: np.ndarray
    amp_scale: np.ndarray = field(default=None)

    def __post_init__(self):
        self.phi_app = np.asarray(self.phi_app, dtype=float)
        if self.amp_scale is None:
            self.amp_scale = np.ones_like(self.phi_app)
        self.amp_scale = np.asarray(self.amp_scale, dtype=float)
        if self.amp_scale.shape != self.phi_app.shape:
            raise ValueError("phi_app and amp_scale must have equal length")
        if np.any(self.amp_scale < 0):
            raise ValueError("amplitude scale must be >= 0")

    def __len__(self):
        return len(self.phi_app)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pulse_index", "phi_app_rad", "amp_scale"])
            for i, (p, a) in enumerate(zip(self.phi_app, self.amp_scale)):
                w.writerow([i, repr(float(p)), repr(float(a))])

    @classmethod
    def from_csv(cls, path) -> "NoiseTrajectory":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or "phi_app_rad" not in rows[0]:
            raise ValueError(f"{path}: not a trajectory CSV (need pulse_index, phi_app_rad, amp_scale)")
        idx = [int(r["pulse_index"]) for r in rows]
        if idx != list(range(len(rows))):
            raise ValueError(f"{path}: pulse_index must run 0..n-1")
        return cls(np.array([float(r["phi_app_rad"]) for r in rows]),
                   np.array([float(r.get("amp_scale") or 1.0) for r in rows]))


def constant_offset(phi: float, onset: float, duration: float, f_expt: float = F_EXPT) -> NoiseTrajectory:
    """Step from zero to ``phi`` at ``onset`` seconds."""
    if abs(phi) > math.pi:
        raise ValueError("|phi| must not exceed pi")
    n = int(round(duration * f_expt))
    first = int(round(onset * f_expt))
    out = np.zeros(n)
    out[first:] = phi
    return NoiseTrajectory(out)


def walk_steps(sigma_1: float, L: int, rng: np.random.Generator) -> np.ndarray:
    """Cumulative sum of L i.i.d. N(0, sigma_1^2) increments."""
    return np.cumsum(rng.normal(0.0, sigma_1, size=L)) if sigma_1 > 0 else np.zeros(L)


def hold_steps(levels: np.ndarray, f_rw: float, f_expt: float, pulses: int | None = None) -> np.ndarray:
    """Hold each walk level for round(f_expt/f_rw) pulses.

    When ``pulses`` is given the result is cut or padded (last level held)
    to that length.
    """
    if f_rw > f_expt:
        raise ValueError("walk rate must not exceed the pulse rate")
    hold = max(1, int(round(f_expt / f_rw)))
    out = np.repeat(levels, hold)
    if pulses is not None:
        if len(out) >= pulses:
            out = out[:pulses]
        else:
            out = np.concatenate([out, np.full(pulses - len(out), levels[-1] if len(levels) else 0.0)])
    return out


def gaussian_walk(sigma_1: float, L: int, f_rw: float, f_expt: float,
                  rng: np.random.Generator) -> NoiseTrajectory:
    """Discrete Gaussian phase walk held on the pulse clock (L * hold pulses)."""
    return NoiseTrajectory(hold_steps(walk_steps(sigma_1, L, rng), f_rw, f_expt))


def amplitude_noise(sigma_amp: float, pulses: int, rng: np.random.Generator) -> np.ndarray:
    """Per-pulse energy multipliers N(1, sigma_amp), truncated at 0.

    For sigma_amp <= 0.25 a negative draw has probability below 3.2e-5, so
    the truncation barely changes the distribution.
    """
    if sigma_amp < 0:
        raise ValueError("sigma_amp must be >= 0")
    if sigma_amp == 0:
        return np.ones(pulses)
    return np.maximum(rng.normal(1.0, sigma_amp, size=pulses), 0.0)


def build_trajectory(noise: NoiseSpec, duration: float, f_expt: float,
                     rng: np.random.Generator) -> NoiseTrajectory:
    """Materialise ``noise`` over ``duration`` seconds of pulses."""
    errs = noise.validation_errors()
    if errs:
        raise ValueError("; ".join(errs))
    n = int(round(duration * f_expt))
    first = int(round(noise.onset_time * f_expt))
    phi = np.zeros(n)
    if noise.kind == "constant":
        phi[first:] = noise.phi_const
    elif noise.kind in ("random_walk", "composite"):
        levels = walk_steps(noise.sigma_1, noise.L, rng)
        held = hold_steps(levels, noise.f_rw, f_expt, max(n - first, 0))
        phi[first:] = held
    if noise.drift_rate:
        phi += noise.drift_rate * np.arange(n) / f_expt
    amp = np.ones(n)
    if noise.kind in ("amplitude", "composite"):
        amp = amplitude_noise(noise.sigma_amp, n, rng)
    return NoiseTrajectory(phi, amp)
