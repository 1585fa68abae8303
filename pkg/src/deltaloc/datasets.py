"""Trajectory and POI ingestion, plus synthetic scenarios.

Trajectory CSV schemas (an optional header line is skipped):

* ``cell-csv``:   ``timestamp,cell``
* ``latlon-csv``: ``timestamp,lat,lon``

Timestamps are numbers or ISO-8601 strings and must strictly increase.
Lat/lon is projected to kilometres with an equirectangular projection about
a configured origin, then mapped to grid cells; rows off the grid are
dropped and counted.
"""

from __future__ import annotations

import csv
import glob
import math
import os
import warnings
from dataclasses import dataclass
from datetime import datetime

import numpy as np
from scipy import sparse

from .grid import GridConfig, coords_to_cells

EARTH_RADIUS_KM = 6371.0088


class TrajectoryFormatError(ValueError):
    pass


@dataclass
class ParsedTrajectory:
    cells: np.ndarray
    dropped: int
    path: str = ""


def project_latlon(lat, lon, origin_lat: float, origin_lon: float, ref_lat: float) -> np.ndarray:
    """Equirectangular projection to km, ``(0, 0)`` at the origin."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    k = math.pi / 180.0 * EARTH_RADIUS_KM
    x = (lon - origin_lon) * k * math.cos(math.radians(ref_lat))
    y = (lat - origin_lat) * k
    return np.column_stack([x, y])


def _parse_time(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        return datetime.fromisoformat(s.strip()).timestamp()


def parse_trajectories(
    path,
    fmt: str,
    g: GridConfig,
    *,
    origin_lat: float = 0.0,
    origin_lon: float = 0.0,
    ref_lat: float | None = None,
) -> ParsedTrajectory:
    if fmt not in ("cell-csv", "latlon-csv"):
        raise ValueError(f"unknown trajectory format {fmt!r}")
    width = 2 if fmt == "cell-csv" else 3
    times, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not _looks_numeric(row[-1]):
                continue  # header
            if len(row) != width:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: expected {width} fields for {fmt}, got {len(row)}"
                )
            try:
                t = _parse_time(row[0])
                vals = [float(c) for c in row[1:]]
            except ValueError:
                raise TrajectoryFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
            if times and t <= times[-1][0]:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: timestamp {row[0]!r} does not increase "
                    f"(previous on line {times[-1][1]})"
                )
            times.append((t, lineno))
            values.append(vals)
    if not values:
        raise TrajectoryFormatError(f"{path}: no trajectory rows")

    arr = np.array(values)
    if fmt == "cell-csv":
        if np.any(arr[:, 0] != np.round(arr[:, 0])):
            raise TrajectoryFormatError(f"{path}: cell indices must be integers")
        cells = arr[:, 0].astype(np.int64)
        cells = np.where((cells >= 0) & (cells < g.m), cells, -1)
    else:
        ref = origin_lat if ref_lat is None else ref_lat
        pts = project_latlon(arr[:, 0], arr[:, 1], origin_lat, origin_lon, ref)
        cells = coords_to_cells(pts, g)
    dropped = int(np.count_nonzero(cells < 0))
    cells = cells[cells >= 0]
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} rows outside the grid", stacklevel=2)
    if cells.size == 0:
        raise TrajectoryFormatError(f"{path}: every row falls outside the grid")
    return ParsedTrajectory(cells, dropped, str(path))


def _looks_numeric(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def expand_paths(patterns, base_dir=".") -> list[str]:
    out = []
    for pat in patterns:
        full = pat if os.path.isabs(pat) else os.path.join(base_dir, pat)
        hits = sorted(glob.glob(full))
        if not hits:
            raise FileNotFoundError(f"no files match {pat!r}")
        out.extend(hits)
    return out


def read_pois(path) -> np.ndarray:
    """POI CSV ``x,y`` in map units; an optional header is skipped."""
    pts = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and not _looks_numeric(row[0]):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected x,y")
            pts.append([float(row[0]), float(row[1])])
    return np.array(pts).reshape(-1, 2)


def write_pois(path, pois) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in np.asarray(pois, dtype=float):
            w.writerow([repr(float(x)), repr(float(y))])


def write_cell_csv(path, cells) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "cell"])
        for t, c in enumerate(cells):
            w.writerow([t, int(c)])


# --- synthetic scenarios -------------------------------------------------


def random_walk_chain(g: GridConfig, stay: float = 0.2, cells=None) -> sparse.csr_matrix:
    """Lazy random walk on the 4-neighbourhood, restricted to ``cells`` (all by default).

    Cells outside the allowed set become absorbing self-loops.
    """
    allowed = np.zeros(g.m, dtype=bool)
    allowed[np.arange(g.m) if cells is None else np.asarray(cells, dtype=np.int64)] = True
    rows, cols, vals = [], [], []
    for i in range(g.m):
        if not allowed[i]:
            rows.append(i), cols.append(i), vals.append(1.0)
            continue
        r, c = divmod(i, g.cols)
        nbrs = [
            rr * g.cols + cc
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
            if 0 <= rr < g.rows and 0 <= cc < g.cols and allowed[rr * g.cols + cc]
        ]
        if not nbrs:
            rows.append(i), cols.append(i), vals.append(1.0)
            continue
        rows.append(i), cols.append(i), vals.append(stay)
        for j in nbrs:
            rows.append(i), cols.append(j), vals.append((1.0 - stay) / len(nbrs))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(g.m, g.m))


def corridor_cells(g: GridConfig) -> np.ndarray:
    """Two-cell-wide diagonal band ``{(i, i), (i, i + 1)}``."""
    n = min(g.rows, g.cols)
    out = [g.index(i, i) for i in range(n)] + [g.index(i, i + 1) for i in range(n) if i + 1 < g.cols]
    return np.array(sorted(out))


def sample_chain(M, start: int, length: int, rng: np.random.Generator) -> np.ndarray:
    M = sparse.csr_matrix(M)
    out = np.empty(length, dtype=np.int64)
    out[0] = start
    for t in range(1, length):
        row = M.getrow(out[t - 1])
        out[t] = row.indices[rng.choice(row.nnz, p=row.data / row.data.sum())]
    return out


def synthetic_scenario(kind: str, g: GridConfig, n_trajectories: int, length: int,
                       stay: float, rng: np.random.Generator):
    """Return ``(M, trajectories, support)`` for a named synthetic scenario."""
    if kind == "random_walk":
        support = np.arange(g.m)
    elif kind == "corridor":
        support = corridor_cells(g)
    else:
        raise ValueError(f"unknown synthetic scenario {kind!r}")
    M = random_walk_chain(g, stay, support)
    trajs = [sample_chain(M, int(rng.choice(support)), length, rng) for _ in range(n_trajectories)]
    return M, trajs, support
