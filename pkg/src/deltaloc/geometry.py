"""Planar convex geometry used by the release mechanisms.

Polygons are stored as ``(n, 2)`` float arrays of vertices in
counter-clockwise order.  Hulls that collapse to a point or a segment are
returned as :class:`DegenerateHull` and are never inflated implicitly; use
:func:`regularize_degenerate` for that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Collinearity threshold on cross products, in map-units^2.
HULL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise ValueError("a ConvexPolygon needs at least 3 vertices")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    @property
    def area(self) -> float:
        return polygon_area(self)

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Boolean mask of ``points`` lying in the closed polygon."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        rel = pts[:, None, :] - v[None, :, :]
        cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
        scale = np.linalg.norm(e, axis=1)[None, :]
        return np.all(cross >= -tol * scale, axis=1)


@dataclass(frozen=True, eq=False)
class DegenerateHull:
    """Hull of points that are all coincident (1 point) or collinear (2 endpoints)."""

    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float).reshape(-1, 2)
        if len(p) not in (1, 2):
            raise ValueError("a DegenerateHull is a point or a segment")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def is_point(self) -> bool:
        return len(self.points) == 1

    @property
    def area(self) -> float:
        return 0.0


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points, tol: float = HULL_TOL) -> ConvexPolygon | DegenerateHull:
    """Convex hull by Andrew's monotone chain.

    Output vertices are a subset of the input points, counter-clockwise,
    starting from the lexicographically smallest point.  Points within
    ``tol`` of being collinear with a hull edge are dropped.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) == 0:
        raise ValueError("convex_hull of an empty point set")
    if len(pts) == 1:
        return DegenerateHull(pts)
    pl = pts.tolist()

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= tol:
                out.pop()
            out.append(p)
        return out

    lower = chain(pl)
    upper = chain(reversed(pl))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        # all collinear: the two extreme points along the sort order
        return DegenerateHull([pl[0], pl[-1]])
    return ConvexPolygon(np.array(hull))


def sensitivity_hull(hull_vertices, tol: float = HULL_TOL) -> ConvexPolygon | DegenerateHull:
    """Convex hull of all pairwise differences ``v_i - v_j`` of the given vertices.

    Only the vertices of ``Conv(X)`` need to be passed; the result equals the
    hull of the differences of every point of ``X``.
    """
    v = np.asarray(hull_vertices, dtype=float).reshape(-1, 2)
    if len(v) == 0:
        raise ValueError("sensitivity_hull needs at least one vertex")
    if len(v) == 1:
        return DegenerateHull(np.zeros((1, 2)))
    diffs = (v[:, None, :] - v[None, :, :]).reshape(-1, 2)
    return convex_hull(diffs, tol=tol)


def hull_vertices(hull: ConvexPolygon | DegenerateHull) -> np.ndarray:
    return hull.vertices if isinstance(hull, ConvexPolygon) else hull.points


def polygon_area(P) -> float:
    if isinstance(P, DegenerateHull):
        return 0.0
    v = P.vertices
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def second_moment(P: ConvexPolygon) -> np.ndarray:
    """Exact ``E[y y^T]`` for ``y`` uniform on ``P`` (moments about the origin).

    Fans triangles out of the vertex mean and sums the closed-form triangle
    integral ``A/12 * (sum v_i v_i^T + s s^T)`` with ``s`` the vertex sum.
    """
    if isinstance(P, DegenerateHull):
        raise ValueError("second moment of a degenerate hull is singular")
    v = P.vertices
    c = v.mean(axis=0)
    a, b = v, np.roll(v, -1, axis=0)
    areas = 0.5 * ((a[:, 0] - c[0]) * (b[:, 1] - c[1]) - (a[:, 1] - c[1]) * (b[:, 0] - c[0]))
    s = a + b + c
    outer = (
        np.einsum("ni,nj->nij", a, a)
        + np.einsum("ni,nj->nij", b, b)
        + np.outer(c, c)[None]
        + np.einsum("ni,nj->nij", s, s)
    )
    integral = np.einsum("n,nij->ij", areas / 12.0, outer)
    total = areas.sum()
    if total <= 0:
        raise ValueError("polygon has non-positive area")
    sigma = integral / total
    return 0.5 * (sigma + sigma.T)


def inv_sqrt_spd(S) -> np.ndarray:
    """Closed-form ``S^{-1/2}`` of a symmetric positive definite 2x2 matrix."""
    S = np.asarray(S, dtype=float)
    det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    tr = S[0, 0] + S[1, 1]
    if not (det > 0 and tr > 0):
        raise ValueError("matrix is not positive definite")
    sd = math.sqrt(det)
    root = (S + sd * np.eye(2)) / math.sqrt(tr + 2.0 * sd)
    # inverse of a 2x2 [[a, b], [b, d]]
    a, b, d = root[0, 0], root[0, 1], root[1, 1]
    rdet = a * d - b * b
    inv = np.array([[d, -b], [-b, a]]) / rdet
    return 0.5 * (inv + inv.T)


def isotropic_transform(P: ConvexPolygon) -> np.ndarray:
    """Symmetric ``T`` with ``second_moment(T P) = I``."""
    return inv_sqrt_spd(second_moment(P))


def isotropic_transform_mc(
    P: ConvexPolygon,
    rng: np.random.Generator,
    n_samples: int = 1000,
    tol: float = 1e-3,
    max_samples: int = 10**8,
) -> np.ndarray:
    """Sampled estimate of the isotropic transform.

    Two independent estimates are drawn from ``n_samples`` points each; the
    first is accepted once their Frobenius distance is below ``tol``,
    otherwise the sample size is doubled.
    """
    if isinstance(P, DegenerateHull):
        raise ValueError("isotropic transform of a degenerate hull is undefined")
    n = int(n_samples)
    while True:
        y1 = sample_uniform(P, rng, size=n)
        y2 = sample_uniform(P, rng, size=n)
        T1 = inv_sqrt_spd(y1.T @ y1 / n)
        T2 = inv_sqrt_spd(y2.T @ y2 / n)
        if np.linalg.norm(T1 - T2) < tol or 2 * n > max_samples:
            return T1
        n *= 2


def _halfplanes(P: ConvexPolygon):
    v = P.vertices
    e = np.roll(v, -1, axis=0) - v
    normals = np.column_stack([e[:, 1], -e[:, 0]])
    offsets = np.einsum("ij,ij->i", normals, v)
    return normals, offsets


def minkowski_norm(P: ConvexPolygon, v) -> float | np.ndarray:
    """Gauge ``min{r >= 0 : v in r P}``; ``v`` may be a point or an ``(n, 2)`` array.

    ``P`` is the intersection of half-planes ``n_k . x <= c_k`` with every
    ``c_k > 0``, so the gauge is ``max_k (n_k . v) / c_k``.
    """
    if isinstance(P, DegenerateHull):
        raise ValueError("Minkowski norm of a degenerate hull is undefined")
    normals, offsets = _halfplanes(P)
    scale = np.linalg.norm(normals, axis=1)
    if np.any(offsets <= HULL_TOL * scale):
        raise ValueError("origin is not interior to the polygon")
    arr = np.asarray(v, dtype=float)
    g = (arr.reshape(-1, 2) @ (normals / offsets[:, None]).T).max(axis=1)
    g = np.maximum(g, 0.0)
    return float(g[0]) if arr.ndim == 1 else g


def sample_uniform(P: ConvexPolygon, rng: np.random.Generator, size: int | None = None):
    """Uniform point(s) in ``P`` via fan triangulation and barycentric sampling."""
    if isinstance(P, DegenerateHull):
        raise ValueError("cannot sample uniformly from a degenerate hull")
    v = P.vertices
    a = v[0]
    b, c = v[1:-1], v[2:]
    areas = 0.5 * ((b[:, 0] - a[0]) * (c[:, 1] - a[1]) - (b[:, 1] - a[1]) * (c[:, 0] - a[0]))
    n = 1 if size is None else int(size)
    tri = rng.choice(len(areas), size=n, p=areas / areas.sum())
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1.0
    u[flip] = 1.0 - u[flip]
    pts = a + u[:, :1] * (b[tri] - a) + u[:, 1:] * (c[tri] - a)
    return pts[0] if size is None else pts


def apply_transform(T, obj):
    """Apply the linear map ``T`` to a point, an ``(n, 2)`` array, or a polygon."""
    T = np.asarray(T, dtype=float)
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    if abs(det) <= 1e-12:
        raise ValueError("transform is singular")
    if isinstance(obj, ConvexPolygon):
        w = obj.vertices @ T.T
        if det < 0:
            w = w[::-1]
        return ConvexPolygon(w)
    if isinstance(obj, DegenerateHull):
        return DegenerateHull(obj.points @ T.T)
    arr = np.asarray(obj, dtype=float)
    return arr @ T.T


def regularize_degenerate(P, w: float) -> ConvexPolygon:
    """Inflate a point to a ``w``-square, or a segment to a ``w``-wide rectangle."""
    if not w > 0:
        raise ValueError(f"regularization width must be positive, got {w}")
    if isinstance(P, ConvexPolygon):
        return P
    h = 0.5 * w
    if P.is_point:
        x, y = P.points[0]
        return ConvexPolygon([[x - h, y - h], [x + h, y - h], [x + h, y + h], [x - h, y + h]])
    a, b = P.points
    d = b - a
    n = np.array([-d[1], d[0]]) / np.hypot(d[0], d[1]) * h
    return ConvexPolygon([a - n, b - n, b + n, a + n])
