"""Sweep epsilon for both mechanisms on a synthetic scenario and tabulate the metrics.

    python scripts/compare_mechanisms.py scripts/configs/corridor.toml --eps 0.5 1 2 4

Writes one CSV row per (mechanism, epsilon) to stdout, or to --out.
"""

import argparse
import csv
import dataclasses
import sys

from deltaloc.config import load_config
from deltaloc.experiment import run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--mechanisms", nargs="+", default=["PIM", "LM"])
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args(argv)

    base = load_config(args.config)
    fields = ["mechanism", "epsilon", "delta", "n_steps", "mean_delta_size", "drift_ratio",
              "mean_distance", "rms_distance"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for mech in args.mechanisms:
        for eps in args.eps:
            cfg = dataclasses.replace(base, mechanism=mech, epsilon=eps)
            report, _ = run_experiment(cfg)
            w.writerow({k: getattr(report, k) for k in fields})
            fh.flush()
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
