"""Run the ratio audit on honest mechanisms and on deliberately miscalibrated ones.

A mutant runs its noise at ``factor * eps`` while the audit checks the
advertised ``eps``; any factor above 1 under-noises and should fail.

    python scripts/audit_mutants.py --samples 1000000 --factors 1 1.25 1.5 2
"""

import argparse

import numpy as np

from deltaloc.audit import default_bins, dp_ratio_audit, mechanism_sampler
from deltaloc.grid import GridConfig
from deltaloc.mechanism import LM, PIM, rms_radius


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--cells", type=int, nargs="+", default=[0, 11, 2])
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--factors", type=float, nargs="+", default=[1.0, 1.25, 1.5, 2.0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    g = GridConfig(0.0, 0.0, 1.0, 10, 10)
    rng = np.random.default_rng(args.seed)
    print(f"{'mech':4} {'factor':>6} {'max ratio':>10} {'threshold':>10}  verdict")
    for mech in (PIM, LM):
        for f in args.factors:
            s = mechanism_sampler(mech, f * args.eps, args.cells, g)
            bins = default_bins(g.centers(args.cells), rms_radius(s.context))
            rep = dp_ratio_audit(s, args.eps, args.cells, args.samples, bins, rng)
            verdict = "pass" if rep.passed else "FAIL"
            print(f"{mech:4} {f:6.2f} {rep.max_ratio:10.4f} {rep.threshold:10.4f}  {verdict}")


if __name__ == "__main__":
    main()
