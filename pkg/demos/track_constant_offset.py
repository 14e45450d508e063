"""A sudden phase offset, then the tracking loop switching on.

The channel jumps to a fixed offset at t=2 s. Between 2 s and 4 s the
receiver runs blind and its error probability climbs; at 4 s tracking
starts and after one estimation cycle (500 x n_avg pulses) the LO has
been moved onto the new phase.

    python3 demos/track_constant_offset.py [--phi 0.4]
"""

import argparse

import numpy as np

from phasetrack.calibration import Calibration
from phasetrack.channel import NoiseSpec
from phasetrack.physics import ReceiverParams, qnl_qpsk
from phasetrack.tracking import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phi", type=float, default=0.4)
    ap.add_argument("--calibration", help="saved calibration JSON (default: tabulated r, f)")
    args = ap.parse_args()

    p = ReceiverParams()
    cal = Calibration.load(args.calibration) if args.calibration else Calibration.published(5.0)
    q = qnl_qpsk(p.mean_photon_number)
    res = run_scenario(NoiseSpec(phi_const=args.phi, onset_time=2.0), p, cal, 8.0,
                       seed=3, tracking_start=4.0)
    print(f"qnl_qpsk(5) = {q:.4f}")
    for t, pe, _, est, lo in res.bin_rows():
        bar = "#" * int(round(pe * 800))
        est_s = "   -  " if np.isnan(est) else f"{est:+.3f}"
        print(f" t={t:4.2f}s  P_E={pe:.4f} {'<' if pe < q else '>'}qnl  "
              f"est={est_s} lo={lo:+.3f} {bar}")


if __name__ == "__main__":
    main()
