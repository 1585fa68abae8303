"""Monte-Carlo RMS error of a single release against the sqrt(Area(K))/eps reference.

For each epsilon and each location set, prints the empirical RMS error of PIM
and LM, the closed-form RMS, and the ratio of the PIM error to the reference.

    python scripts/error_scaling.py --samples 100000
"""

import argparse
import csv
import sys

import numpy as np

from deltaloc.audit import error_estimate, lower_bound_reference, mechanism_sampler
from deltaloc.grid import GridConfig
from deltaloc.mechanism import LM, PIM, rms_radius

GRID = GridConfig(0.0, 0.0, 1.0, 20, 20)
SETS = {
    "triangle": [GRID.index(0, 0), GRID.index(1, 1), GRID.index(0, 2)],
    "block3x3": [GRID.index(r, c) for r in range(3) for c in range(3)],
    "diagonal10": [GRID.index(i, i) for i in range(10)],
    "row10": [GRID.index(0, i) for i in range(10)],
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["set", "epsilon", "mechanism", "rms_mc", "rms_se", "rms_exact",
                "reference", "ratio_to_reference"])
    for name, cells in SETS.items():
        x = cells[len(cells) // 2]
        origin = GRID.centers([x])[0]
        for eps in args.eps:
            ref = None
            for mech in (PIM, LM):
                s = mechanism_sampler(mech, eps, cells, GRID)
                if mech == PIM:
                    ref = lower_bound_reference(s.context.K, eps)
                rms, se = error_estimate(s, x, origin, args.samples, rng)
                w.writerow([name, eps, mech, f"{rms:.6g}", f"{se:.3g}",
                            f"{rms_radius(s.context):.6g}", f"{ref:.6g}", f"{rms / ref:.4f}"])


if __name__ == "__main__":
    main()
