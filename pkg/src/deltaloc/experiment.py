"""Experiment orchestration and evaluation metrics.

Every (trajectory, repetition) pair gets its own random stream derived from
``SeedSequence([seed, trajectory_id, repetition])``, so results do not
depend on execution order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .datasets import expand_paths, parse_trajectories, read_pois, synthetic_scenario
from .framework import run_trajectory
from .markov import as_transition_matrix, learn_transition, load_transition

log = logging.getLogger(__name__)

# stream id of the synthetic data generator, kept apart from the release streams
_DATA_STREAM = 2**32 - 1


class ExperimentError(RuntimeError):
    pass


def knn_eval(released, truth, pois, k: int, k_prime: int) -> tuple[float, float]:
    """Precision ``|R & R'| / k'`` and recall ``|R & R'| / k`` of a kNN query.

    ``R`` holds the ``k`` POIs nearest ``truth``, ``R'`` the ``k'`` nearest
    ``released``; distance ties go to the lower POI index.
    """
    pois = np.asarray(pois, dtype=float).reshape(-1, 2)
    if not 1 <= k <= k_prime:
        raise ValueError(f"need 1 <= k <= k', got k={k}, k'={k_prime}")
    if len(pois) < k_prime:
        raise ValueError(f"need at least k'={k_prime} POIs, got {len(pois)}")
    d_true = np.linalg.norm(pois - np.asarray(truth, dtype=float), axis=1)
    d_rel = np.linalg.norm(pois - np.asarray(released, dtype=float), axis=1)
    R = set(np.argsort(d_true, kind="stable")[:k].tolist())
    Rp = set(np.argsort(d_rel, kind="stable")[:k_prime].tolist())
    hit = len(R & Rp)
    return hit / k_prime, hit / k


def knn_table(rows, pois, k: int, k_primes) -> list[dict]:
    """Mean precision/recall over release-log rows for each ``k'``."""
    out = []
    for kp in k_primes:
        pr = np.array([
            knn_eval((r["z_x"], r["z_y"]), (r["true_x"], r["true_y"]), pois, k, kp) for r in rows
        ])
        out.append({"k": k, "k_prime": kp,
                    "precision": float(pr[:, 0].mean()), "recall": float(pr[:, 1].mean())})
    return out


@dataclass
class MetricsReport:
    mechanism: str
    epsilon: float
    delta: float
    n_trajectories: int
    repetitions: int
    n_steps: int
    mean_delta_size: float
    drift_ratio: float
    mean_distance: float
    rms_distance: float
    per_timestamp: list = field(default_factory=list)
    knn: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def per_timestamp_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["t", "n", "mean_delta_size", "drift_ratio", "mean_distance"]
        w.writerow(cols)
        for row in self.per_timestamp:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()


def summarize(rows, cfg: ExperimentConfig, n_traj: int, pois=None) -> MetricsReport:
    """Aggregate release-log rows into a :class:`MetricsReport`."""
    if not rows:
        raise ExperimentError("no releases to summarize")
    t = np.array([r["t"] for r in rows])
    size = np.array([r["delta_size"] for r in rows], dtype=float)
    drift = np.array([r["drifted"] for r in rows], dtype=float)
    dist = np.hypot([r["z_x"] - r["true_x"] for r in rows], [r["z_y"] - r["true_y"] for r in rows])
    per_t = []
    for ti in np.unique(t):
        sel = t == ti
        per_t.append({
            "t": int(ti),
            "n": int(sel.sum()),
            "mean_delta_size": float(size[sel].mean()),
            "drift_ratio": float(drift[sel].mean()),
            "mean_distance": float(dist[sel].mean()),
        })
    knn = knn_table(rows, pois, cfg.knn.k, cfg.knn.k_prime) if pois is not None else []
    return MetricsReport(
        mechanism=cfg.mechanism,
        epsilon=cfg.epsilon,
        delta=cfg.delta,
        n_trajectories=n_traj,
        repetitions=cfg.repetitions,
        n_steps=len(rows),
        mean_delta_size=float(size.mean()),
        drift_ratio=float(drift.mean()),
        mean_distance=float(dist.mean()),
        rms_distance=float(np.sqrt((dist**2).mean())),
        per_timestamp=per_t,
        knn=knn,
    )


def load_inputs(cfg: ExperimentConfig):
    """Trajectories, transition matrix and initial posterior for ``cfg``."""
    g = cfg.grid
    train = None
    if cfg.data.trajectories:
        paths = expand_paths(cfg.data.trajectories, cfg.base_dir)
        kw = dict(origin_lat=cfg.projection.origin_lat, origin_lon=cfg.projection.origin_lon,
                  ref_lat=cfg.projection.ref_lat)
        trajs = [parse_trajectories(p, cfg.data.format, g, **kw).cells for p in paths]
        if cfg.data.training:
            train_paths = expand_paths(cfg.data.training, cfg.base_dir)
            train = [parse_trajectories(p, cfg.data.format, g, **kw).cells for p in train_paths]
        else:
            train = trajs
        if cfg.data.transition:
            M = load_transition(cfg.resolve(cfg.data.transition))
        else:
            M = learn_transition(train, g.m, cfg.data.alpha)
        visited = np.unique(np.concatenate(train))
    else:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _DATA_STREAM]))
        s = cfg.synthetic
        M, trajs, visited = synthetic_scenario(s.kind, g, s.n_trajectories, s.length, s.stay, rng)
        if cfg.data.transition:
            M = load_transition(cfg.resolve(cfg.data.transition))
    M = as_transition_matrix(M)
    if M.shape != (g.m, g.m):
        raise ExperimentError(f"transition matrix is {M.shape}, grid has {g.m} cells")

    if cfg.initial == "uniform":
        initial = None
    elif cfg.initial == "first":
        initial = "first"
    else:
        initial = np.zeros(g.m)
        initial[visited] = 1.0 / len(visited)
    return trajs, M, initial


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None,
                   fmt: str = "json"):
    """Run every trajectory ``cfg.repetitions`` times; return ``(report, log_rows)``.

    With ``out_dir`` set, writes ``metrics.json`` (or ``metrics.csv`` per
    timestamp when ``fmt == "csv"``) and ``releases.jsonl``.
    """
    trajs, M, initial = load_inputs(cfg)
    g = cfg.grid
    rows = []
    for tid, traj in enumerate(trajs):
        for rep in range(cfg.repetitions):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, tid, rep]))
            try:
                recs = run_trajectory(traj, cfg.epsilon, cfg.delta, cfg.mechanism, M, g, rng,
                                      initial=initial, keep_vectors=False)
            except Exception as exc:
                t = getattr(exc, "timestamp", "?")
                raise ExperimentError(f"trajectory {tid}, repetition {rep}, t={t}: {exc}") from exc
            for rec in recs:
                row = {"trajectory": tid, "repetition": rep}
                row.update(rec.to_dict(g))
                rows.append(row)
        log.info("trajectory %d done (%d steps)", tid, len(traj))

    pois = read_pois(cfg.resolve(cfg.data.pois)) if cfg.data.pois else None
    report = summarize(rows, cfg, len(trajs), pois)
    if out_dir is not None:
        write_outputs(report, rows, out_dir, fmt)
    return report, rows


def write_outputs(report: MetricsReport, rows, out_dir, fmt: str = "json") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    elif fmt == "csv":
        (out / "metrics.csv").write_text(report.per_timestamp_csv(), encoding="utf-8")
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    write_release_log(out / "releases.jsonl", rows)


def write_release_log(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_release_log(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]
