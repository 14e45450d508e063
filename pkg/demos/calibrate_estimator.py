"""Calibrating the sine-cosine phase estimator from simulated detection data.

The estimator reads the phase from photon-count differences between the
four LO settings. Discrimination errors shrink those differences, so a
bias factor f rescales them, a weight r mixes the cosine and sine branches,
and a gain curve g straightens what is left. This demo runs all three
steps on one offset sweep and shows the estimate before and after g.

    python3 demos/calibrate_estimator.py [--windows 300]
"""

import argparse

import numpy as np

from phasetrack.calibration import apply_gain, calibrate, default_offsets, simulate_sweep
from phasetrack.physics import ReceiverParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--windows", type=int, default=300, help="500-pulse windows per offset")
    ap.add_argument("--navg", type=int, default=20)
    args = ap.parse_args()

    p = ReceiverParams()
    rng = np.random.default_rng(7)
    sweep = simulate_sweep(p, default_offsets(), args.windows, rng)
    cal = calibrate(p, args.navg, 0, rng, sweep=sweep)
    print(f"r_opt={cal.r_opt:.3f}  f_opt={cal.f_opt:.3f}  ({len(cal.gain_knots)} gain knots)")

    test = simulate_sweep(p, np.linspace(-0.6, 0.6, 7), args.navg * 20, rng)
    avg = test.averaged(cal.r_opt, cal.f_opt, args.navg)
    print("\n phi_off   <phi_i>   g*<phi_i>")
    for phi, raw, corr in zip(test.offsets, avg.mean(axis=1),
                              apply_gain(cal.gain_knots, avg).mean(axis=1)):
        print(f" {phi:+.2f}    {raw:+.3f}    {corr:+.3f}")


if __name__ == "__main__":
    main()
