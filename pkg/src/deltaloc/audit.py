"""Monte-Carlo checks of the privacy and utility guarantees.

The audits only consume a *sampler*: a callable ``sampler(cell, n, rng)``
returning an ``(n, 2)`` array of releases for true cell ``cell``.  They never
look inside the mechanism.  Output events are the cells of a rectangular
histogram; differential privacy bounds the probability ratio of every
measurable event, so every bin is a valid test event.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import polygon_area
from .grid import GridConfig
from .mechanism import build_context, sample_noise

DEFAULT_SLACK = 0.15
# Bins below this count are too noisy for the 15% slack (ratio s.e. ~ sqrt(1.4/n)).
MIN_BIN_COUNT = 1000


@dataclass
class AuditReport:
    kind: str
    epsilon_claimed: float
    max_ratio: float
    max_log_ratio: float
    n_samples: int
    slack: float
    passed: bool
    worst: dict = field(default_factory=dict)
    pair_ratios: dict = field(default_factory=dict)
    bin_ratios: list = field(default_factory=list)
    note: str = ""

    @property
    def threshold(self) -> float:
        return math.exp(self.epsilon_claimed) * (1.0 + self.slack)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["threshold"] = self.threshold
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def mechanism_sampler(mechanism: str, epsilon: float, cells, g: GridConfig, **kwargs):
    """Sampler for a fixed location set; the context is built once and shared."""
    ctx = build_context(mechanism, epsilon, cells, g, **kwargs)

    def sampler(cell, n, rng):
        return g.centers([cell])[0] + sample_noise(ctx, rng, size=n)

    sampler.context = ctx
    return sampler


def default_bins(points, radius: float, n_bins: int = 16, extent: float = 6.0):
    """Square bin grid covering the points' bounding box padded by ``extent * radius``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lo = pts.min(axis=0) - extent * radius
    hi = pts.max(axis=0) + extent * radius
    return (np.linspace(lo[0], hi[0], n_bins + 1), np.linspace(lo[1], hi[1], n_bins + 1))


def _check_bins(bins):
    xe, ye = (np.asarray(b, dtype=float) for b in bins)
    if xe.ndim != 1 or ye.ndim != 1 or len(xe) < 2 or len(ye) < 2:
        raise ValueError("bin grid needs at least two edges per axis")
    if np.any(np.diff(xe) <= 0) or np.any(np.diff(ye) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    return xe, ye


def _histogram(z, xe, ye):
    h, _, _ = np.histogram2d(z[:, 0], z[:, 1], bins=(xe, ye))
    return h


def _table(a):
    return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]


def dp_ratio_audit(
    sampler,
    epsilon: float,
    cells,
    n_samples: int,
    bins,
    rng: np.random.Generator,
    slack: float = DEFAULT_SLACK,
    min_count: int = MIN_BIN_COUNT,
) -> AuditReport:
    """Largest empirical ``Pr(z in B | x1) / Pr(z in B | x2)`` over cell pairs and bins.

    Only bins holding at least ``min_count`` releases under both cells take
    part.  Passes iff that maximum is at most ``e^epsilon (1 + slack)``.
    """
    cells = [int(c) for c in cells]
    if len(cells) < 2:
        raise ValueError("a ratio audit needs at least two cells")
    xe, ye = _check_bins(bins)
    hists = {c: _histogram(np.asarray(sampler(c, n_samples, rng)), xe, ye) for c in cells}

    best, worst, pair_ratios, table = 0.0, {}, {}, None
    for a in cells:
        for b in cells:
            if a == b:
                continue
            ha, hb = hists[a], hists[b]
            ok = (ha >= min_count) & (hb >= min_count)
            ratio = np.full(ha.shape, np.nan)
            ratio[ok] = ha[ok] / hb[ok]
            r = float(np.nanmax(ratio)) if ok.any() else 0.0
            pair_ratios[f"{a}->{b}"] = r
            if r > best:
                best = r
                i, j = np.unravel_index(np.nanargmax(ratio), ratio.shape)
                worst = {"pair": [a, b], "bin": [int(i), int(j)],
                         "counts": [int(ha[i, j]), int(hb[i, j])]}
                table = ratio
    threshold = math.exp(epsilon) * (1.0 + slack)
    return AuditReport(
        kind="dp_ratio",
        epsilon_claimed=float(epsilon),
        max_ratio=best,
        max_log_ratio=math.log(best) if best > 0 else float("-inf"),
        n_samples=int(n_samples),
        slack=float(slack),
        passed=bool(best <= threshold),
        worst=worst,
        pair_ratios=pair_ratios,
        bin_ratios=_table(table) if table is not None else [],
        note=f"bins with fewer than {min_count} releases under either cell are skipped",
    )


def adversarial_audit(
    sampler,
    epsilon: float,
    cells,
    prior,
    n_samples: int,
    bins,
    rng: np.random.Generator,
    slack: float = DEFAULT_SLACK,
    min_count: int = MIN_BIN_COUNT,
) -> AuditReport:
    """Largest empirical posterior-to-prior ratio an observer can reach.

    True cells are drawn from ``prior`` (aligned with ``cells``), releases are
    binned, and the per-bin empirical posterior is compared with the prior.
    """
    cells = [int(c) for c in cells]
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (len(cells),):
        raise ValueError("prior must have one entry per audited cell")
    if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
        raise ValueError("prior must be a probability vector")
    xe, ye = _check_bins(bins)
    draws = rng.multinomial(int(n_samples), prior)
    joint = np.zeros((len(cells), len(xe) - 1, len(ye) - 1))
    for k, (c, n) in enumerate(zip(cells, draws)):
        if n:
            joint[k] = _histogram(np.asarray(sampler(c, int(n), rng)), xe, ye)
    total = joint.sum(axis=0)
    ok = total >= min_count

    best, worst, table = 0.0, {}, None
    for k, c in enumerate(cells):
        if prior[k] == 0:
            continue
        ratio = np.full(total.shape, np.nan)
        ratio[ok] = joint[k][ok] / total[ok] / prior[k]
        if not ok.any():
            continue
        r = float(np.nanmax(ratio))
        if r > best:
            best = r
            i, j = np.unravel_index(np.nanargmax(ratio), ratio.shape)
            worst = {"cell": c, "bin": [int(i), int(j)], "bin_count": int(total[i, j])}
            table = ratio
    threshold = math.exp(epsilon) * (1.0 + slack)
    return AuditReport(
        kind="adversarial",
        epsilon_claimed=float(epsilon),
        max_ratio=best,
        max_log_ratio=math.log(best) if best > 0 else float("-inf"),
        n_samples=int(n_samples),
        slack=float(slack),
        passed=bool(best <= threshold),
        worst=worst,
        bin_ratios=_table(table) if table is not None else [],
        note=f"bins with fewer than {min_count} releases in total are skipped",
    )


def error_estimate(sampler, x_star: int, origin, n_samples: int, rng) -> tuple[float, float]:
    """RMS distance between releases for ``x_star`` and ``origin``, with its standard error."""
    z = np.asarray(sampler(x_star, n_samples, rng))
    d2 = ((z - np.asarray(origin, dtype=float)) ** 2).sum(axis=1)
    ms = float(d2.mean())
    rms = math.sqrt(ms)
    se = float(d2.std(ddof=1)) / math.sqrt(len(d2)) / (2.0 * rms) if rms > 0 else 0.0
    return rms, se


def lower_bound_reference(K, epsilon: float) -> float:
    """``sqrt(Area(K)) / epsilon``: the error lower bound without its constant."""
    area = polygon_area(K)
    if not area > 0:
        raise ValueError("lower bound needs a non-degenerate sensitivity hull")
    return math.sqrt(area) / epsilon

