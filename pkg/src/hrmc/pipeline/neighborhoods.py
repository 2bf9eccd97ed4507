"""Seed selection, local neighborhood formation and sampling-pattern thinning."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..core import ObservedMatrix, partial_distances_to
from ..errors import InsufficientSeedsError, NeighborhoodError
from .params import PipelineParams

__all__ = [
    "Neighborhood",
    "select_seeds",
    "form_neighborhood",
    "thin_neighborhood",
    "binomial_pmf",
    "retention_probability",
]

OVERLAP_POOL = "insufficient overlap pool"
SPARSE_BALL = "sparse ball"
SHORT_SEED = "seed support too small"


@dataclass(frozen=True)
class Neighborhood:
    """Columns gathered around one seed; the seed itself is never a member.

    ``submatrix`` holds the member columns in ``member_cols`` order.
    ``distances`` are the members' partial distances to the seed.
    """

    seed_col: int
    member_cols: np.ndarray
    submatrix: ObservedMatrix
    seed_support: np.ndarray
    distances: np.ndarray
    thinned: bool = False


def select_seeds(m: ObservedMatrix, params: PipelineParams, rng: np.random.Generator) -> list[int]:
    """Draw columns uniformly without replacement, keeping well-sampled ones.

    A column qualifies when it has at least ``eta0`` observations. Drawing
    stops once ``params.n_seeds`` columns qualified.
    """
    need = params.n_seeds
    counts = m.column_counts()
    order = rng.permutation(m.n_cols)
    keep = order[counts[order] >= params.eta0]
    if keep.size < need:
        raise InsufficientSeedsError(int(keep.size), need)
    return [int(j) for j in keep[:need]]


def form_neighborhood(
    m: ObservedMatrix, seed: int, params: PipelineParams, rng: np.random.Generator
) -> Neighborhood:
    """Gather columns that are close to ``seed`` on its observed support.

    1. keep columns observed on at least ``t0`` rows of the seed's support;
    2. draw ``ell0 * n`` of them uniformly;
    3. estimate each one's distance to the seed from the common rows;
    4. ``ball`` rule: draw the members uniformly among columns whose estimate
       is below ``eps0**2 / 2``; ``nearest`` rule: take the closest ones.

    Raises
    ------
    NeighborhoodError
        When step 1 or step 4 leaves too few columns.
    """
    _, mask = m.dense_view()
    support = np.flatnonzero(mask[:, seed])
    size = params.members
    if support.size < params.t0:
        raise NeighborhoodError(SHORT_SEED, seed, int(support.size), params.t0)

    overlap = mask[support].sum(axis=0)
    overlap[seed] = -1
    candidates = np.flatnonzero(overlap >= params.t0)
    pool_size = params.ell0 * params.n
    if candidates.size < pool_size:
        raise NeighborhoodError(OVERLAP_POOL, seed, int(candidates.size), pool_size)
    pool = np.sort(rng.choice(candidates, size=pool_size, replace=False))

    _, est = partial_distances_to(m, seed, pool, min_overlap=params.t0)

    if params.neighbor_rule == "ball":
        inside = pool[est < params.eps0**2 / 2.0]
        if inside.size < size:
            raise NeighborhoodError(SPARSE_BALL, seed, int(inside.size), size)
        members = np.sort(rng.choice(inside, size=size, replace=False))
    else:
        if pool.size < size:
            raise NeighborhoodError(SPARSE_BALL, seed, int(pool.size), size)
        # random tie-break keeps duplicate columns from favoring low indices
        order = np.lexsort((rng.random(pool.size), est))
        members = np.sort(pool[order[:size]])

    lookup = dict(zip(pool.tolist(), est.tolist()))
    dists = np.array([lookup[j] for j in members.tolist()])
    return Neighborhood(
        seed_col=int(seed),
        member_cols=members,
        submatrix=m.select_columns(members),
        seed_support=support,
        distances=dists,
    )


def binomial_pmf(t: int, p: float) -> np.ndarray:
    """P(Binomial(t, p) = j) for j = 0..t, evaluated in log space."""
    j = np.arange(t + 1)
    if p <= 0.0:
        return (j == 0).astype(float)
    if p >= 1.0:
        return (j == t).astype(float)
    logc = np.array([math.lgamma(t + 1) - math.lgamma(i + 1) - math.lgamma(t - i + 1) for i in j])
    return np.exp(logc + j * math.log(p) + (t - j) * math.log1p(-p))


def retention_probability(t: int, p0: float, q: int) -> float:
    """rho = P(Binomial(t, p0) >= q)."""
    if q <= 0:
        return 1.0
    if q > t:
        return 0.0
    return float(min(1.0, binomial_pmf(t, p0)[q:].sum()))


def thin_neighborhood(
    nb: Neighborhood, seed_support, p0: float, t0: int, rng: np.random.Generator
) -> Neighborhood:
    """Undo the selection bias on the seed's support.

    Members were chosen for having at least ``t0`` observations among the
    ``t`` support rows, so their on-support count follows a truncated
    Binomial(t, p0). Each member independently keeps its samples with
    probability rho = P(Binomial >= t0); otherwise it keeps a uniformly random
    subset of size Z, with Z drawn from the Binomial restricted to
    0..t0-1. The on-support count is then exactly Binomial(t, p0).
    Observations off the support are untouched.
    """
    support = np.asarray(seed_support, dtype=np.int64)
    t = support.size
    q = int(t0)
    rho = retention_probability(t, p0, q)
    if q <= 0 or rho >= 1.0:
        return replace(nb, thinned=True)

    low = binomial_pmf(t, p0)[:q]
    low = low / low.sum()
    sub = nb.submatrix
    on_support = np.isin(sub.rows, support)
    keep = np.ones(sub.nnz, dtype=bool)
    for j in range(sub.n_cols):
        lo, hi = sub._indptr[j], sub._indptr[j + 1]
        hits = lo + np.flatnonzero(on_support[lo:hi])
        if hits.size < q:
            raise ValueError(
                f"member {int(nb.member_cols[j])} has {hits.size} < {q} support observations"
            )
        if rng.random() < rho:
            continue
        z = int(rng.choice(q, p=low))
        drop = rng.choice(hits, size=hits.size - z, replace=False)
        keep[drop] = False
    thinned = ObservedMatrix(
        sub.n_rows, sub.n_cols, sub.rows[keep], sub.cols[keep], sub.values[keep]
    )
    return replace(nb, submatrix=thinned, thinned=True)
