import math

import numpy as np
import pytest

from deltaloc.grid import GridConfig


def brute_force_extreme_points(points, tol=1e-9):
    """Extreme points of a finite planar set, by angular gaps.

    ``p`` is a vertex of the hull iff the directions from ``p`` to every other
    point fit in an open half-plane, i.e. some circular gap between sorted
    directions exceeds pi.  Independent of any hull-walking algorithm.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    out = []
    for i, p in enumerate(pts):
        others = np.delete(pts, i, axis=0) - p
        ang = np.sort(np.arctan2(others[:, 1], others[:, 0]))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
        if gaps.max() > math.pi + tol:
            out.append(p)
    return np.array(out)


def same_point_set(a, b, tol=1e-9):
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    # mutual nearest-neighbour match, so points closer than tol count once
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return bool(np.all(d.min(axis=1) <= tol) and np.all(d.min(axis=0) <= tol))


def importance_normalizer(density, radius, rng, n):
    """Monte-Carlo integral of ``density`` over the plane.

    Proposal: planar exponential ``q(y) = exp(-|y|/s) / (2 pi s^2)`` with
    ``s = radius``; drawn as ``|y| ~ Gamma(2, s)``, uniform angle.  For a
    K-norm density at budget eps, passing ``max|vertex of K| / eps`` bounds
    the importance weights.
    """
    s = float(radius)
    r = rng.gamma(2.0, s, size=n)
    th = rng.uniform(0.0, 2 * math.pi, size=n)
    y = np.column_stack([r * np.cos(th), r * np.sin(th)])
    q = np.exp(-r / s) / (2 * math.pi * s * s)
    w = density(y) / q
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(n))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def unit_grid():
    return GridConfig(0.0, 0.0, 1.0, 10, 10)
