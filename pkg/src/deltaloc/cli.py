"""Command-line entry point: ``deltaloc {learn,run,audit,knn}``.

Exit status is 0 on success, 1 on a runtime failure or a failed audit, and
2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from .config import load_config, tomllib
from .datasets import parse_trajectories, read_pois
from .experiment import knn_table, read_release_log, run_experiment
from .grid import GridConfig
from .markov import learn_transition, save_transition
from .mechanism import MECHANISMS, rms_radius


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _float_list(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int, help="seed for all randomness (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="report format (default json)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="deltaloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("learn", parents=[common], help="learn a transition matrix")
    s.add_argument("trajectories", nargs="+", help="trajectory CSV files")
    s.add_argument("--input-format", choices=("cell-csv", "latlon-csv"),
                   help="trajectory schema (default: config data.format or cell-csv)")
    s.add_argument("--m", type=int, help="number of cells when no config is given")
    s.add_argument("--alpha", type=float, help="additive smoothing (default: config or 0)")

    s = sub.add_parser("run", parents=[common], help="run an experiment config")
    s.add_argument("--repetitions", type=int, help="override config repetitions")

    s = sub.add_parser("audit", parents=[common], help="Monte-Carlo privacy audit")
    s.add_argument("--kind", choices=("dp", "adversarial"), default=None)
    s.add_argument("--mechanism", choices=MECHANISMS)
    s.add_argument("--epsilon", type=float, help="claimed epsilon")
    s.add_argument("--mechanism-epsilon", type=float,
                   help="epsilon the mechanism actually runs at (default: claimed)")
    s.add_argument("--cells", type=_int_list, help="comma-separated location set")
    s.add_argument("--prior", type=_float_list, help="prior over --cells (adversarial)")
    s.add_argument("--samples", type=int)
    s.add_argument("--slack", type=float)
    s.add_argument("--bins", type=int)

    s = sub.add_parser("knn", parents=[common], help="kNN precision/recall of a release log")
    s.add_argument("--log", required=True, help="releases.jsonl from `run`")
    s.add_argument("--pois", help="POI CSV (default: config data.pois)")
    s.add_argument("--k", type=int)
    s.add_argument("--k-prime", type=_int_list)
    return p


def _emit(text: str, out: str | None, name: str) -> None:
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_learn(args) -> int:
    cfg = load_config(args.config) if args.config else None
    fmt = args.input_format or (cfg.data.format if cfg else "cell-csv")
    alpha = args.alpha if args.alpha is not None else (cfg.data.alpha if cfg else 0.0)
    if cfg:
        g = cfg.grid
        kw = dict(origin_lat=cfg.projection.origin_lat, origin_lon=cfg.projection.origin_lon,
                  ref_lat=cfg.projection.ref_lat)
    else:
        if fmt != "cell-csv":
            raise ValueError("latlon-csv needs --config for the grid and projection")
        m = args.m
        if m is None:
            big = GridConfig(0.0, 0.0, 1.0, 1, 2**62)
            m = max(int(parse_trajectories(p, fmt, big).cells.max()) for p in args.trajectories) + 1
        g = GridConfig(0.0, 0.0, 1.0, 1, m)
        kw = {}
    trajs = [parse_trajectories(p, fmt, g, **kw).cells for p in args.trajectories]
    M = learn_transition(trajs, g.m, alpha)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_transition(out / "transition.txt", M)
    print(out / "transition.txt")
    return 0


def cmd_run(args) -> int:
    if not args.config:
        raise ValueError("run needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.repetitions is not None:
        cfg.repetitions = args.repetitions
    out = args.out or "out"
    report, _ = run_experiment(cfg, out, args.format)
    print(f"steps={report.n_steps} mean|dX|={report.mean_delta_size:.3f} "
          f"drift={report.drift_ratio:.4f} distance={report.mean_distance:.4f} -> {out}")
    return 0


def _audit_settings(args) -> dict:
    file_cfg = {}
    if args.config:
        file_cfg = tomllib.loads(Path(args.config).read_text(encoding="utf-8"))
    s = {
        "kind": file_cfg.get("kind", "dp"),
        "mechanism": file_cfg.get("mechanism", "PIM"),
        "epsilon": file_cfg.get("epsilon", 1.0),
        "mechanism_epsilon": file_cfg.get("mechanism_epsilon"),
        "cells": file_cfg.get("cells"),
        "prior": file_cfg.get("prior"),
        "samples": file_cfg.get("samples", 10**6),
        "slack": file_cfg.get("slack", audit_mod.DEFAULT_SLACK),
        "bins": file_cfg.get("bins", 16),
        "seed": file_cfg.get("seed", 0),
        "grid": file_cfg.get("grid", {"min_x": 0.0, "min_y": 0.0, "cell_size": 1.0,
                                  "rows": 10, "cols": 10}),
    }
    for key in ("kind", "mechanism", "epsilon", "mechanism_epsilon", "cells", "prior",
                "samples", "slack", "bins", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            s[key] = val
    if s["mechanism_epsilon"] is None:
        s["mechanism_epsilon"] = s["epsilon"]
    if not s["cells"]:
        raise ValueError("audit needs a location set (--cells or `cells` in the config)")
    return s


def cmd_audit(args) -> int:
    s = _audit_settings(args)
    g = GridConfig(**s["grid"])
    rng = np.random.default_rng(s["seed"])
    sampler = audit_mod.mechanism_sampler(s["mechanism"], s["mechanism_epsilon"], s["cells"], g)
    bins = audit_mod.default_bins(g.centers(s["cells"]), rms_radius(sampler.context), s["bins"])
    if s["kind"] == "dp":
        report = audit_mod.dp_ratio_audit(sampler, s["epsilon"], s["cells"], s["samples"], bins,
                                          rng, slack=s["slack"])
    else:
        prior = s["prior"] or [1.0 / len(s["cells"])] * len(s["cells"])
        report = audit_mod.adversarial_audit(sampler, s["epsilon"], s["cells"], prior,
                                             s["samples"], bins, rng, slack=s["slack"])
    _emit(report.to_json() + "\n", args.out, "audit.json")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: max ratio {report.max_ratio:.4f} vs threshold {report.threshold:.4f}",
          file=sys.stderr)
    return 0 if report.passed else 1


def cmd_knn(args) -> int:
    cfg = load_config(args.config) if args.config else None
    pois_path = args.pois or (str(cfg.resolve(cfg.data.pois)) if cfg and cfg.data.pois else None)
    if not pois_path:
        raise ValueError("knn needs --pois or data.pois in the config")
    k = args.k or (cfg.knn.k if cfg else 5)
    k_primes = args.k_prime or (cfg.knn.k_prime if cfg else [k])
    rows = read_release_log(args.log)
    table = knn_table(rows, read_pois(pois_path), k, k_primes)
    if args.format == "json":
        _emit(json.dumps(table, indent=2) + "\n", args.out, "knn.json")
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["k", "k_prime", "precision", "recall"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(table)
        _emit(buf.getvalue(), args.out, "knn.csv")
    return 0


COMMANDS = {"learn": cmd_learn, "run": cmd_run, "audit": cmd_audit, "knn": cmd_knn}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - reported, exit 1
        if args.verbose:
            raise
        print(f"deltaloc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
