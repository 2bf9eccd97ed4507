"""Rank-constrained completion of a single partially observed matrix.

Two backends share one interface:

* ``als``: alternating least squares on an explicit ``U V^T`` factorization,
  with all per-column (and per-row) normal equations solved as one batch.
* ``grassmann``: incremental gradient descent of the column space on the
  Grassmannian, one observed column at a time, with the greedy step that
  zeroes the current column's residual.

Ranks are tried in ascending order and the first exact fit on the observed
entries wins, so the returned basis has the smallest rank consistent with the
data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import ObservedMatrix, Subspace, orthonormalize
from .errors import UnsamplableLineError

__all__ = ["SolverConfig", "CompletionResult", "complete_lowrank", "completion_failed"]

log = logging.getLogger(__name__)

BACKENDS = ("als", "grassmann")


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the low-rank engine.

    ``exact_tol`` is relative to the RMS magnitude of the observed entries.
    ``rank_search="max"`` skips the ascending search and fits ``max_rank``
    only (used for the whole-matrix baseline, where every lower rank is known
    to fail and each fit is expensive).
    """

    exact_tol: float = 1e-6
    max_iter: int = 500
    max_restarts: int = 5
    backend: str = "als"
    conv_tol: float = 1e-10
    rank_search: str = "ascending"
    ridge: float = 1e-12
    # iterate past exact_tol down to exact_tol * polish so bases are sharp
    polish: float = 1e-6

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.rank_search not in ("ascending", "max"):
            raise ValueError("rank_search must be 'ascending' or 'max'")
        if self.exact_tol <= 0 or self.max_iter < 1 or self.max_restarts < 0:
            raise ValueError("exact_tol > 0, max_iter >= 1, max_restarts >= 0 required")


@dataclass(frozen=True)
class CompletionResult:
    basis: Subspace
    completed: np.ndarray
    observed_rmse: float
    converged: bool
    iterations: int
    observed_scale: float = 1.0
    empty_rows: tuple = ()
    # rows with fewer observations than the fitted rank: their basis entries
    # are not pinned down by the data
    underdetermined_rows: tuple = ()

    @property
    def relative_rmse(self) -> float:
        if self.observed_scale == 0:
            return 0.0 if self.observed_rmse == 0 else math.inf
        return self.observed_rmse / self.observed_scale


def completion_failed(res: CompletionResult, cfg: SolverConfig, rank_bound: int) -> bool:
    """Detect a neighborhood that did not complete to an exact rank <= r fit.

    Empty or underdetermined rows also count as failure: an exact fit there
    does not identify the column space.
    """
    if res.observed_rmse > cfg.exact_tol * res.observed_scale:
        return True
    if res.basis.dim > rank_bound:
        return True
    return bool(res.empty_rows or res.underdetermined_rows)


def _batched_solve(gram: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    d = gram.shape[-1]
    tr = np.trace(gram, axis1=1, axis2=2)
    lam = ridge * tr / d + 1e-300
    gram = gram + lam[:, None, None] * np.eye(d)
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def _outer_rows(a: np.ndarray) -> np.ndarray:
    return (a[:, :, None] * a[:, None, :]).reshape(a.shape[0], -1)


def _solve_right(u, x, mask, ridge):
    """Least-squares V with U fixed: one d x d system per column."""
    d = u.shape[1]
    gram = (mask.T @ _outer_rows(u)).reshape(-1, d, d)
    return _batched_solve(gram, x.T @ u, ridge)


def _solve_left(v, x, mask, ridge):
    d = v.shape[1]
    gram = (mask @ _outer_rows(v)).reshape(-1, d, d)
    return _batched_solve(gram, x @ v, ridge)


def _rmse(u, v, x, mask, nnz):
    r = (u @ v.T - x) * mask
    return math.sqrt(float(np.sum(r * r)) / nnz)


def _spectral_init(x, d, rng):
    g = rng.standard_normal((x.shape[1], d))
    q, _ = np.linalg.qr(x @ g)
    # pad if x has fewer than d independent directions
    if np.linalg.matrix_rank(q) < d:
        q, _ = np.linalg.qr(q + 1e-3 * rng.standard_normal(q.shape))
    return q


def _fit_als(x, mask, nnz, d, cfg, rng):
    u = _spectral_init(x, d, rng)
    floor = cfg.exact_tol * cfg.polish
    prev = math.inf
    rmse = math.inf
    v = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        v = _solve_right(u, x, mask, cfg.ridge)
        u = _solve_left(v, x, mask, cfg.ridge)
        u, r = np.linalg.qr(u)
        v = v @ r.T
        rmse = _rmse(u, v, x, mask, nnz)
        if rmse <= floor or prev - rmse < cfg.conv_tol * prev:
            break
        prev = rmse
    return u, v, rmse, it


def _fit_grassmann(x, mask, nnz, d, cfg, rng):
    n, m = x.shape
    u = _spectral_init(x, d, rng)
    cols = [np.flatnonzero(mask[:, j]) for j in range(m)]
    floor = cfg.exact_tol * cfg.polish
    prev = math.inf
    rmse = math.inf
    v = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        for j in rng.permutation(m):
            idx = cols[j]
            if idx.size == 0:
                continue
            w, *_ = np.linalg.lstsq(u[idx], x[idx, j], rcond=None)
            p = u @ w
            res = np.zeros(n)
            res[idx] = x[idx, j] - p[idx]
            rn, pn, wn = np.linalg.norm(res), np.linalg.norm(p), np.linalg.norm(w)
            if rn < 1e-15 or pn < 1e-15 or wn < 1e-15:
                continue
            t = math.atan(rn / pn)
            u = u + np.outer((math.cos(t) - 1.0) * p / pn + math.sin(t) * res / rn, w / wn)
        u, _ = np.linalg.qr(u)
        v = _solve_right(u, x, mask, cfg.ridge)
        rmse = _rmse(u, v, x, mask, nnz)
        if rmse <= floor or prev - rmse < cfg.conv_tol * prev:
            break
        prev = rmse
    return u, v, rmse, it


_FITTERS = {"als": _fit_als, "grassmann": _fit_grassmann}


def complete_lowrank(
    m: ObservedMatrix,
    max_rank: int,
    cfg: SolverConfig | None = None,
    rng: np.random.Generator | None = None,
    allow_empty_rows: bool = False,
) -> CompletionResult:
    """Complete ``m`` with the lowest rank <= ``max_rank`` that fits it exactly.

    Parameters
    ----------
    m : ObservedMatrix
        Matrix to complete. Every column, and every row unless
        ``allow_empty_rows``, needs at least one observation.
    max_rank : int
        Largest rank tried.
    cfg : SolverConfig, optional
    rng : numpy.random.Generator, optional
        Source of the random initializations; defaults to a fixed seed.
    allow_empty_rows : bool
        Complete unobserved rows as zeros and list them in ``empty_rows``
        instead of raising.

    Returns
    -------
    CompletionResult
        ``converged`` is False when no rank reached ``cfg.exact_tol``; the
        result is then the best ``max_rank`` fit.
    """
    cfg = cfg or SolverConfig()
    if rng is None:
        rng = np.random.default_rng(0)
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    if m.nnz == 0:
        raise ValueError("matrix has no observations")
    col_counts = m.column_counts()
    if np.any(col_counts == 0):
        raise UnsamplableLineError("column", int(np.flatnonzero(col_counts == 0)[0]))
    row_counts = m.row_counts()
    empty = np.flatnonzero(row_counts == 0)
    if empty.size and not allow_empty_rows:
        raise UnsamplableLineError("row", int(empty[0]))

    dense, mask_b = m.to_dense()
    mask = mask_b.astype(float)
    scale = math.sqrt(float(m.values @ m.values) / m.nnz)
    norm = scale if scale > 0 else 1.0
    x = dense / norm
    fit = _FITTERS[cfg.backend]
    max_rank = min(max_rank, m.n_rows, m.n_cols)

    ranks = range(1, max_rank + 1) if cfg.rank_search == "ascending" else [max_rank]
    best = None
    total_iter = 0
    for d in ranks:
        best = None
        for attempt in range(cfg.max_restarts + 1):
            u, v, rmse, it = fit(x, mask, m.nnz, d, cfg, rng)
            total_iter += it
            if best is None or rmse < best[2]:
                best = (u, v, rmse)
            if rmse <= cfg.exact_tol:
                break
            log.debug("rank %d attempt %d stalled at relative rmse %.3g", d, attempt, rmse)
        if best[2] <= cfg.exact_tol:
            break

    u, v, rmse = best
    completed = (u @ v.T) * norm
    if empty.size:
        completed[empty] = 0.0
        u = u.copy()
        u[empty] = 0.0
    basis = Subspace(orthonormalize(u) if empty.size else u)
    weak = np.flatnonzero(row_counts < u.shape[1])
    return CompletionResult(
        basis=basis,
        completed=completed,
        observed_rmse=rmse * norm,
        converged=bool(rmse <= cfg.exact_tol),
        iterations=total_iter,
        observed_scale=scale,
        empty_rows=tuple(int(i) for i in empty),
        underdetermined_rows=tuple(int(i) for i in weak),
    )
