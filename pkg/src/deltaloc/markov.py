"""Markov mobility model: learning, prior propagation and Bayes updates.

Probability vectors are plain 1-D numpy arrays.  Transition matrices are
kept as ``scipy.sparse.csr_matrix`` so city-scale grids stay cheap.
"""

from __future__ import annotations

import os
from collections.abc import Iterable, Sequence

import numpy as np
from scipy import sparse

PROB_TOL = 1e-9


class ZeroLikelihoodError(ValueError):
    """Raised when an observation has zero likelihood under every prior cell."""


def check_prob_vector(p, tol: float = PROB_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("probability vector must be 1-D")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probability vector has negative or non-finite entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probability vector sums to {p.sum()!r}, not 1")
    return p


def as_transition_matrix(M, tol: float = PROB_TOL) -> sparse.csr_matrix:
    """Coerce ``M`` to CSR and check that it is row-stochastic."""
    M = sparse.csr_matrix(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"transition matrix must be square, got {M.shape}")
    if M.nnz and M.data.min() < 0:
        raise ValueError("transition matrix has negative entries")
    rows = np.asarray(M.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(rows - 1.0) > tol)
    if bad.size:
        raise ValueError(f"row {bad[0]} of transition matrix sums to {rows[bad[0]]!r}")
    return M


def learn_transition(
    trajectories: Iterable[Sequence[int]], m: int, alpha: float = 0.0
) -> sparse.csr_matrix:
    """Count-based estimate ``(count(i->j) + alpha) / (count(i->.) + alpha m)``.

    With ``alpha == 0`` rows of never-left states become self-loops.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    src, dst = [], []
    for traj in trajectories:
        t = np.asarray(traj, dtype=np.int64)
        if t.size and (t.min() < 0 or t.max() >= m):
            raise IndexError(f"trajectory visits a cell outside [0, {m})")
        src.append(t[:-1])
        dst.append(t[1:])
    src = np.concatenate(src) if src else np.empty(0, np.int64)
    dst = np.concatenate(dst) if dst else np.empty(0, np.int64)

    counts = sparse.csr_matrix((np.ones(src.size), (src, dst)), shape=(m, m))
    counts.sum_duplicates()
    row_tot = np.asarray(counts.sum(axis=1)).ravel()

    if alpha > 0:
        dense = counts.toarray() + alpha
        return sparse.csr_matrix(dense / (row_tot + alpha * m)[:, None])

    unseen = np.flatnonzero(row_tot == 0)
    scale = np.where(row_tot > 0, row_tot, 1.0)
    M = sparse.diags(1.0 / scale) @ counts
    M = M + sparse.csr_matrix((np.ones(unseen.size), (unseen, unseen)), shape=(m, m))
    return sparse.csr_matrix(M)


def propagate(p, M) -> np.ndarray:
    """One Markov step ``p M``, renormalized."""
    p = np.asarray(p, dtype=float)
    if p.shape != (M.shape[0],):
        raise ValueError(f"dimension mismatch: vector {p.shape} vs matrix {M.shape}")
    out = np.asarray(M.T @ p).ravel()
    np.maximum(out, 0.0, out=out)
    return out / out.sum()


def posterior_update(prior, emission) -> np.ndarray:
    prior = np.asarray(prior, dtype=float)
    e = np.asarray(emission, dtype=float)
    if prior.shape != e.shape:
        raise ValueError(f"dimension mismatch: prior {prior.shape} vs emission {e.shape}")
    if np.any(e < 0):
        raise ValueError("emission likelihoods must be non-negative")
    joint = prior * e
    total = joint.sum()
    if not total > 0:
        raise ZeroLikelihoodError("observation has zero likelihood under the prior")
    return joint / total


def save_transition(path: str | os.PathLike, M) -> None:
    """Write ``M`` as a triplet file: a header line ``m`` then ``i j p`` per non-zero."""
    M = sparse.coo_matrix(M)
    order = np.lexsort((M.col, M.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{M.shape[0]}\n")
        for k in order:
            fh.write(f"{M.row[k]} {M.col[k]} {float(M.data[k])!r}\n")


def load_transition(path: str | os.PathLike) -> sparse.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        numbered = [(n, ln.strip()) for n, ln in enumerate(fh, start=1)]
    numbered = [(n, ln) for n, ln in numbered if ln and not ln.startswith("#")]
    if not numbered:
        raise ValueError(f"{path}: empty transition file")
    try:
        m = int(numbered[0][1])
    except ValueError:
        raise ValueError(f"{path}: first line must be the state count m") from None
    rows, cols, vals = [], [], []
    for lineno, ln in numbered[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"{path}: malformed triplet on line {lineno}: {ln!r}")
        rows.append(int(parts[0]))
        cols.append(int(parts[1]))
        vals.append(float(parts[2]))
    M = sparse.csr_matrix((vals, (rows, cols)), shape=(m, m))
    return as_transition_matrix(M)
