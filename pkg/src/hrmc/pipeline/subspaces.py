"""Local subspace estimation from neighborhoods and refinement of the candidates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Subspace, subspace_contained_in
from ..errors import NoCandidatesError
from ..lowrank import CompletionResult, SolverConfig, complete_lowrank, completion_failed
from .neighborhoods import Neighborhood

__all__ = [
    "Candidate",
    "CandidateSet",
    "complete_neighborhood",
    "complete_neighborhoods",
    "refine_subspaces",
]


@dataclass(frozen=True)
class Candidate:
    subspace: Subspace
    seed: int
    rank: int
    failed: bool = False
    relative_rmse: float = 0.0
    empty_rows: int = 0
    underdetermined_rows: int = 0


@dataclass
class CandidateSet:
    """Successful local completions, plus the discarded ones for diagnostics."""

    candidates: list = field(default_factory=list)
    rejected: list = field(default_factory=list)

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


def complete_neighborhood(
    nb: Neighborhood, r: int, cfg: SolverConfig, rng: np.random.Generator
) -> tuple[Candidate, CompletionResult]:
    sub = nb.submatrix
    nonempty = np.flatnonzero(sub.column_counts() > 0)
    if nonempty.size < sub.n_cols:
        sub = sub.select_columns(nonempty)
    res = complete_lowrank(sub, r, cfg, rng, allow_empty_rows=True)
    cand = Candidate(
        subspace=res.basis,
        seed=nb.seed_col,
        rank=res.basis.dim,
        failed=completion_failed(res, cfg, r),
        relative_rmse=res.relative_rmse,
        empty_rows=len(res.empty_rows),
        underdetermined_rows=len(res.underdetermined_rows),
    )
    return cand, res


def complete_neighborhoods(
    nbs, r: int, cfg: SolverConfig | None = None, rngs=None
) -> CandidateSet:
    """Complete every neighborhood at rank <= ``r`` and keep exact fits.

    ``rngs`` supplies one generator per neighborhood; by default they are
    spawned from a fixed seed.
    """
    cfg = cfg or SolverConfig()
    nbs = list(nbs)
    if rngs is None:
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(0).spawn(len(nbs))]
    out = CandidateSet()
    for nb, rng in zip(nbs, rngs):
        cand, _ = complete_neighborhood(nb, r, cfg, rng)
        (out.rejected if cand.failed else out.candidates).append(cand)
    if not out.candidates:
        raise NoCandidatesError()
    return out


def refine_subspaces(cands, tol: float | None = None) -> list[Subspace]:
    """Prune candidates spanned by lower-rank accepted ones.

    Candidates are visited by ascending dimension (ties by seed index); each
    one is accepted iff it is not contained in the span of those accepted
    before it. ``cands`` may be a :class:`CandidateSet` or a list of
    :class:`Candidate`/:class:`Subspace`.
    """
    items = []
    for pos, c in enumerate(cands):
        if isinstance(c, Subspace):
            items.append((c.dim, pos, c))
        else:
            items.append((c.subspace.dim, c.seed, c.subspace))
    items.sort(key=lambda t: (t[0], t[1]))
    accepted: list[Subspace] = []
    for _, _, s in items:
        if not subspace_contained_in(s, accepted, tol):
            accepted.append(s)
    return accepted
