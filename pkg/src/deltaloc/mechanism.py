"""Location release mechanisms and their emission likelihoods.

Two mechanisms are provided:

* ``PIM`` - the planar isotropic mechanism.  The sensitivity hull ``K`` of
  the location set is mapped to isotropic position ``K_I = T K``; noise is a
  uniform point of ``K_I`` scaled by a Gamma(3, 1/eps) radius and mapped back
  with ``T^{-1}``.  The resulting density is
  ``eps^2 / (2 Area(K)) * exp(-eps * ||z - x||_K)``.
* ``LM`` - the per-axis Laplace baseline with scale ``(d1 + d2) / eps`` where
  ``d1, d2`` are the coordinate spreads of the location set.

A :class:`ReleaseContext` holds everything computed from the location set,
so repeated draws for the same set only pay for sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ConvexPolygon,
    apply_transform,
    convex_hull,
    hull_vertices,
    isotropic_transform,
    isotropic_transform_mc,
    minkowski_norm,
    polygon_area,
    regularize_degenerate,
    sample_uniform,
    second_moment,
    sensitivity_hull,
)
from .grid import GridConfig

PIM = "PIM"
LM = "LM"
MECHANISMS = (PIM, LM)


def _check_epsilon(epsilon):
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")


@dataclass(frozen=True, eq=False)
class ReleaseContext:
    mechanism: str
    epsilon: float
    K: ConvexPolygon | None = None
    K_iso: ConvexPolygon | None = None
    T: np.ndarray | None = None
    T_inv: np.ndarray | None = None
    delta1: float | None = None
    delta2: float | None = None
    laplace_scale: float | None = None

    @property
    def area_K(self) -> float:
        if self.mechanism == PIM:
            return polygon_area(self.K)
        # the l1 ball of radius d1 + d2 is the LM analogue of K
        s = self.delta1 + self.delta2
        return 2.0 * s * s

    def to_dict(self) -> dict:
        out = {"mechanism": self.mechanism, "epsilon": self.epsilon, "area_K": self.area_K}
        if self.mechanism == PIM:
            out["T"] = [float(x) for x in self.T.ravel()]
        else:
            out["delta1"] = self.delta1
            out["delta2"] = self.delta2
            out["laplace_scale"] = self.laplace_scale
        return out


@dataclass(frozen=True, eq=False)
class Release:
    z: np.ndarray
    context: ReleaseContext


def sample_gamma3(epsilon: float, rng: np.random.Generator, size: int | None = None):
    """Gamma(shape 3, scale 1/epsilon) as a sum of three unit exponentials."""
    _check_epsilon(epsilon)
    n = 1 if size is None else int(size)
    u = 1.0 - rng.random((n, 3))  # in (0, 1]
    r = -np.log(u).sum(axis=1) / epsilon
    return float(r[0]) if size is None else r


def sample_laplace(b: float, rng: np.random.Generator, size=None):
    """Laplace(0, b) by inverse CDF on ``u ~ U(-1/2, 1/2)``."""
    if not b > 0:
        raise ValueError(f"Laplace scale must be positive, got {b}")
    u = rng.random(size) - 0.5
    x = -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(x) if size is None else x


def pim_context(
    epsilon: float,
    points,
    reg_width: float,
    *,
    exact: bool = True,
    rng: np.random.Generator | None = None,
) -> ReleaseContext:
    """Build the PIM context for a location set given as ``(n, 2)`` map points.

    ``reg_width`` inflates a point- or segment-shaped sensitivity hull before
    the isotropic transform.  ``exact=False`` estimates ``T`` by sampling,
    which needs ``rng``.
    """
    _check_epsilon(epsilon)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("location set is empty")
    K = sensitivity_hull(hull_vertices(convex_hull(pts)))
    K = regularize_degenerate(K, reg_width)
    if exact:
        T = isotropic_transform(K)
    else:
        if rng is None:
            raise ValueError("sampled isotropic transform needs an rng")
        T = isotropic_transform_mc(K, rng)
    T_inv = np.linalg.inv(T)
    return ReleaseContext(PIM, float(epsilon), K=K, K_iso=apply_transform(T, K), T=T, T_inv=T_inv)


def lm_context(epsilon: float, points, fallback_width: float) -> ReleaseContext:
    """Build the Laplace-baseline context; a zero spread falls back to ``fallback_width``."""
    _check_epsilon(epsilon)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("location set is empty")
    d1, d2 = (pts.max(axis=0) - pts.min(axis=0)).tolist()
    spread = d1 + d2
    if spread <= 0:
        spread = fallback_width
    return ReleaseContext(LM, float(epsilon), delta1=d1, delta2=d2, laplace_scale=spread / epsilon)


def build_context(mechanism: str, epsilon: float, cells, g: GridConfig, **kwargs) -> ReleaseContext:
    pts = g.centers(cells)
    if mechanism == PIM:
        return pim_context(epsilon, pts, g.cell_size, **kwargs)
    if mechanism == LM:
        return lm_context(epsilon, pts, g.cell_size)
    raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")


def sample_noise(ctx: ReleaseContext, rng: np.random.Generator, size: int | None = None):
    """Noise vector(s) ``z - x`` drawn from the context's mechanism."""
    n = 1 if size is None else int(size)
    if ctx.mechanism == PIM:
        zi = sample_uniform(ctx.K_iso, rng, size=n)
        r = sample_gamma3(ctx.epsilon, rng, size=n)
        noise = (r[:, None] * zi) @ ctx.T_inv.T
    elif ctx.mechanism == LM:
        noise = sample_laplace(ctx.laplace_scale, rng, size=(n, 2))
    else:
        raise ValueError(f"unknown mechanism {ctx.mechanism!r}")
    return noise[0] if size is None else noise


def _release(mechanism, epsilon, cells, x_star, g, rng, **kwargs) -> Release:
    cells = [int(c) for c in cells]
    if not cells:
        raise ValueError("location set is empty")
    if int(x_star) not in cells:
        raise ValueError(f"released cell {x_star} is not in the location set")
    ctx = build_context(mechanism, epsilon, cells, g, **kwargs)
    z = g.centers([x_star])[0] + sample_noise(ctx, rng)
    return Release(z, ctx)


def pim_release(epsilon, cells, x_star, g: GridConfig, rng, **kwargs) -> Release:
    return _release(PIM, epsilon, cells, x_star, g, rng, **kwargs)


def lm_release(epsilon, cells, x_star, g: GridConfig, rng) -> Release:
    return _release(LM, epsilon, cells, x_star, g, rng)


def pim_density(z, x, ctx: ReleaseContext):
    """Map-space density of a PIM release at ``z`` given true location ``x``."""
    if ctx.mechanism != PIM:
        raise ValueError("pim_density needs a PIM context")
    eps = ctx.epsilon
    d = np.asarray(z, dtype=float) - np.asarray(x, dtype=float)
    norm = minkowski_norm(ctx.K, d)
    return eps * eps / (2.0 * polygon_area(ctx.K)) * np.exp(-eps * norm)


def pim_emission(z, cells, ctx: ReleaseContext, g: GridConfig) -> np.ndarray:
    """Likelihood of ``z`` for each cell, evaluated in the isotropic space.

    Values are ``eps^2 / (2 Area(K_I)) * exp(-eps ||T z - T s||_{K_I})``.  They
    differ from the map-space density by the constant ``det T``, which
    cancels in the posterior.
    """
    if ctx.mechanism != PIM:
        raise ValueError("pim_emission needs a PIM context")
    eps = ctx.epsilon
    s = g.centers(cells)
    zt = np.asarray(z, dtype=float) @ ctx.T.T
    st = s @ ctx.T.T
    norm = minkowski_norm(ctx.K_iso, zt[None, :] - st)
    return eps * eps / (2.0 * polygon_area(ctx.K_iso)) * np.exp(-eps * norm)


def lm_emission(z, cells, ctx: ReleaseContext, g: GridConfig) -> np.ndarray:
    if ctx.mechanism != LM:
        raise ValueError("lm_emission needs an LM context")
    b = ctx.laplace_scale
    c = g.centers(cells)
    l1 = np.abs(c - np.asarray(z, dtype=float)[None, :]).sum(axis=1)
    return np.exp(-l1 / b) / (4.0 * b * b)


def emission(z, cells, ctx: ReleaseContext, g: GridConfig) -> np.ndarray:
    if ctx.mechanism == PIM:
        return pim_emission(z, cells, ctx, g)
    if ctx.mechanism == LM:
        return lm_emission(z, cells, ctx, g)
    raise ValueError(f"unknown mechanism {ctx.mechanism!r}")


def rms_radius(ctx: ReleaseContext) -> float:
    """Exact root-mean-square length of the release noise."""
    if ctx.mechanism == LM:
        return 2.0 * ctx.laplace_scale
    # E[r^2] = 12 / eps^2 for Gamma(3, 1/eps); noise direction is uniform on K
    return math.sqrt(12.0 * float(np.trace(second_moment(ctx.K)))) / ctx.epsilon
