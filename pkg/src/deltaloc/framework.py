"""Per-timestamp release loop under a public Markov model.

Each step propagates the posterior through the transition matrix, keeps the
smallest set of cells covering ``1 - delta`` of the prior, swaps the true
cell for its nearest in-set surrogate when it falls outside, releases with
the chosen mechanism, and folds the release back into the posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridConfig
from .markov import check_prob_vector, posterior_update, propagate
from .mechanism import Release, build_context, emission, sample_noise

# Slack on the 1 - delta coverage test, absorbs summation round-off.
COVER_TOL = 1e-12


class StepError(RuntimeError):
    """A release step failed; ``timestamp`` is the step index."""

    def __init__(self, timestamp: int, cause: Exception):
        super().__init__(f"step {timestamp}: {cause}")
        self.timestamp = timestamp


@dataclass(frozen=True)
class DeltaLocationSet:
    cells: tuple[int, ...]
    covered_mass: float

    def __contains__(self, cell) -> bool:
        return int(cell) in self.cells

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True, eq=False)
class UserState:
    posterior: np.ndarray
    M: object
    grid: GridConfig
    t: int = 0


@dataclass(frozen=True, eq=False)
class StepRecord:
    t: int
    true_cell: int
    delta_set: DeltaLocationSet
    drifted: bool
    surrogate: int | None
    release: Release
    prior: np.ndarray | None = field(default=None, repr=False)
    posterior: np.ndarray | None = field(default=None, repr=False)

    @property
    def released_cell(self) -> int:
        return self.true_cell if self.surrogate is None else self.surrogate

    def to_dict(self, grid: GridConfig) -> dict:
        ctx = self.release.context
        tx, ty = grid.centers([self.true_cell])[0]
        out = {
            "t": self.t,
            "true_cell": self.true_cell,
            "true_x": float(tx),
            "true_y": float(ty),
            "delta_set": list(self.delta_set.cells),
            "delta_size": len(self.delta_set),
            "drifted": self.drifted,
            "surrogate": self.surrogate,
            "z_x": float(self.release.z[0]),
            "z_y": float(self.release.z[1]),
        }
        out.update(ctx.to_dict())
        return out


def delta_location_set(prior, delta: float) -> DeltaLocationSet:
    """Fewest cells whose prior mass is at least ``1 - delta``.

    Cells are taken in descending prior order, ties by ascending index.
    ``delta == 0`` keeps every cell with positive prior.
    """
    if not 0 <= delta < 1:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    p = np.asarray(prior, dtype=float)
    order = np.lexsort((np.arange(p.size), -p))
    if delta == 0:
        k = int(np.count_nonzero(p > 0))
    else:
        cum = np.cumsum(p[order])
        k = int(np.searchsorted(cum, 1.0 - delta - COVER_TOL, side="left")) + 1
        k = min(k, int(np.count_nonzero(p > 0)) or 1)
    chosen = order[:k]
    return DeltaLocationSet(tuple(int(c) for c in chosen), float(p[chosen].sum()))


def surrogate(dset: DeltaLocationSet, x_star: int, g: GridConfig) -> int:
    """Cell of ``dset`` nearest to ``x_star``; ties go to the lower index."""
    if len(dset) == 0:
        raise ValueError("location set is empty")
    x_star = g.check_index(x_star)
    if x_star in dset:
        return x_star
    cells = np.array(sorted(dset.cells))
    d = np.linalg.norm(g.centers(cells) - g.centers([x_star]), axis=1)
    return int(cells[np.argmin(d)])


def initial_state(M, g: GridConfig, prior=None) -> UserState:
    if prior is None:
        prior = np.full(g.m, 1.0 / g.m)
    prior = check_prob_vector(prior)
    if prior.size != g.m or M.shape != (g.m, g.m):
        raise ValueError("prior, transition matrix and grid disagree on the number of cells")
    return UserState(prior, M, g, 0)


def release_step(
    state: UserState,
    x_star: int,
    epsilon: float,
    delta: float,
    mechanism: str,
    rng: np.random.Generator,
    *,
    keep_vectors: bool = True,
    **context_kwargs,
) -> tuple[StepRecord, UserState]:
    g = state.grid
    x_star = g.check_index(x_star)
    prior = propagate(state.posterior, state.M)
    dset = delta_location_set(prior, delta)
    drifted = x_star not in dset
    used = surrogate(dset, x_star, g) if drifted else x_star

    ctx = build_context(mechanism, epsilon, dset.cells, g, **context_kwargs)
    z = g.centers([used])[0] + sample_noise(ctx, rng)

    # Bayes update over the whole prior support, not just the delta-set
    support = np.flatnonzero(prior > 0)
    e = np.zeros(g.m)
    e[support] = emission(z, support, ctx, g)
    posterior = posterior_update(prior, e)

    rec = StepRecord(
        t=state.t,
        true_cell=x_star,
        delta_set=dset,
        drifted=drifted,
        surrogate=used if drifted else None,
        release=Release(z, ctx),
        prior=prior if keep_vectors else None,
        posterior=posterior if keep_vectors else None,
    )
    return rec, UserState(posterior, state.M, g, state.t + 1)


def run_trajectory(
    trajectory,
    epsilon,
    delta: float,
    mechanism: str,
    M,
    g: GridConfig,
    rng: np.random.Generator,
    *,
    initial=None,
    keep_vectors: bool = True,
) -> list[StepRecord]:
    """Run :func:`release_step` along ``trajectory``.

    ``epsilon`` is a constant budget or a per-step sequence.  ``initial`` is
    the posterior before the first step: a probability vector, the string
    ``"first"`` for a point mass on the first cell, or None for uniform.
    """
    traj = [int(c) for c in trajectory]
    if not traj:
        raise ValueError("trajectory is empty")
    eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (len(traj),))
    if np.any(eps <= 0):
        raise ValueError("every per-step epsilon must be positive")
    if isinstance(initial, str):
        if initial != "first":
            raise ValueError(f"unknown initial posterior {initial!r}")
        initial = np.zeros(g.m)
        initial[traj[0]] = 1.0
    state = initial_state(M, g, initial)
    records = []
    for x, e in zip(traj, eps):
        try:
            rec, state = release_step(
                state, x, float(e), delta, mechanism, rng, keep_vectors=keep_vectors
            )
        except Exception as exc:
            raise StepError(state.t, exc) from exc
        records.append(rec)
    return records

