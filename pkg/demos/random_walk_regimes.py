"""Tracked versus untracked reception under Gaussian phase random walks.

Three walk step sizes give three regimes: a walk that stays well inside
the +-0.6 rad capture range, one that reaches its edge, and one that
leaves it within seconds. Tracked and untracked runs share the same walks
so the comparison is paired.

    python3 demos/random_walk_regimes.py [--walks 5] [--duration 65]
"""

import argparse

import numpy as np

from phasetrack.calibration import Calibration
from phasetrack.channel import NoiseSpec
from phasetrack.physics import ReceiverParams, qnl_qpsk
from phasetrack.tracking import run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--walks", type=int, default=5)
    ap.add_argument("--duration", type=float, default=65.0)
    ap.add_argument("--calibration", help="saved calibration JSON (default: tabulated r, f)")
    args = ap.parse_args()

    p = ReceiverParams()
    cal = Calibration.load(args.calibration) if args.calibration else Calibration.published(5.0)
    q = qnl_qpsk(5.0)
    print(f"qnl_qpsk(5) = {q:.4f}; {args.walks} walks of {args.duration:g} s each")
    for sigma in (1e-3, 5e-3, 25e-3):
        line = [f"sigma_1 = {sigma * 1e3:4.0f} mrad:"]
        for tracking in (True, False):
            runs = run_ensemble(NoiseSpec(kind="random_walk", sigma_1=sigma), p, cal,
                                args.duration, args.walks, seed=11, tracking=tracking)
            pe = np.mean([r.pe for r in runs], axis=0)
            line.append(f"{'tracked' if tracking else 'untracked'} mean {pe.mean():.4f} "
                        f"last 10 s {pe[-20:].mean():.4f}")
        print("  ".join(line))


if __name__ == "__main__":
    main()
