"""End-to-end completion: seeds, neighborhoods, local subspaces, assignment."""

from __future__ import annotations

import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import ObservedMatrix
from ..errors import NeighborhoodError, NoCandidatesError
from ..lowrank import SolverConfig
from .assign import COMPLETED, CompletionReport, complete_one
from .neighborhoods import form_neighborhood, select_seeds, thin_neighborhood
from .params import PipelineParams
from .subspaces import CandidateSet, complete_neighborhood, refine_subspaces

__all__ = ["PipelineConfig", "PipelineResult", "complete_matrix", "as_seed_sequence"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    assign_tol: float = 1e-8
    refine_tol: float | None = None
    threads: int = 1


@dataclass
class PipelineResult:
    reports: list
    subspaces: list
    diagnostics: dict
    shape: tuple

    def completed_matrix(self, observed: ObservedMatrix | None = None, fill=np.nan) -> np.ndarray:
        """Dense completion; unassigned columns keep their observations and
        ``fill`` elsewhere."""
        out = np.full(self.shape, fill, dtype=float)
        if observed is not None:
            out[observed.rows, observed.cols] = observed.values
        for rep in self.reports:
            if rep.completed is not None:
                out[:, rep.column] = rep.completed
        return out

    @property
    def n_completed(self) -> int:
        return sum(r.status == COMPLETED for r in self.reports)

    @property
    def status_counts(self) -> dict:
        return dict(Counter(r.status for r in self.reports))


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _local_subspace(m, seed_col, params, cfg, seq):
    """Neighborhood -> thinning -> completion for one seed (one RNG stream)."""
    rng = np.random.default_rng(seq)
    rec = {"seed": seed_col}
    try:
        nb = form_neighborhood(m, seed_col, params, rng)
    except NeighborhoodError as exc:
        rec.update(outcome=exc.reason, detail=str(exc))
        return rec, None
    if params.thinning_enabled:
        nb = thin_neighborhood(nb, nb.seed_support, params.p0, params.t0, rng)
    cand, res = complete_neighborhood(nb, params.r, cfg.solver, rng)
    rec.update(
        outcome="completion failed" if cand.failed else "candidate",
        rank=cand.rank,
        relative_rmse=cand.relative_rmse,
        members=int(nb.member_cols.size),
    )
    return rec, cand


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def complete_matrix(
    m: ObservedMatrix,
    params: PipelineParams,
    cfg: PipelineConfig | None = None,
    seed=0,
) -> PipelineResult:
    """Complete a matrix whose columns lie in a union of low-rank subspaces.

    Parameters
    ----------
    m : ObservedMatrix
    params : PipelineParams
        Output of :func:`derive_params`, possibly with practical overrides.
    cfg : PipelineConfig, optional
    seed : int or numpy.random.SeedSequence
        Master seed. Every seed's neighborhood gets its own child stream, so
        results do not depend on ``cfg.threads``.

    Returns
    -------
    PipelineResult
        One :class:`CompletionReport` per column, the refined subspaces and
        run diagnostics. Per-column failures are statuses, not exceptions.

    Raises
    ------
    NoCandidatesError
        If no neighborhood completed successfully.
    """
    cfg = cfg or PipelineConfig()
    if m.n_rows != params.n:
        raise ValueError(f"matrix has {m.n_rows} rows but params were derived for n={params.n}")
    master = as_seed_sequence(seed)
    seed_seq, task_seq = master.spawn(2)
    timing = {}

    t = time.perf_counter()
    seeds = select_seeds(m, params, np.random.default_rng(seed_seq))
    timing["seeds"] = time.perf_counter() - t

    t = time.perf_counter()
    streams = task_seq.spawn(len(seeds))
    results = _map(
        lambda i: _local_subspace(m, seeds[i], params, cfg, streams[i]),
        range(len(seeds)),
        cfg.threads,
    )
    timing["local_subspaces"] = time.perf_counter() - t

    cands = CandidateSet()
    records = []
    for rec, cand in results:
        records.append(rec)
        if cand is None:
            continue
        (cands.rejected if cand.failed else cands.candidates).append(cand)
    outcomes = Counter(r["outcome"] for r in records)
    log.info("seeds: %s", dict(outcomes))
    if not cands.candidates:
        raise NoCandidatesError(f"no candidate subspaces (seed outcomes: {dict(outcomes)})")

    t = time.perf_counter()
    subspaces = refine_subspaces(cands.candidates, cfg.refine_tol)
    timing["refine"] = time.perf_counter() - t

    t = time.perf_counter()
    reports = _map(
        lambda j: complete_one(j, m.column(j), subspaces, cfg.assign_tol),
        range(m.n_cols),
        cfg.threads,
    )
    timing["assign"] = time.perf_counter() - t

    diagnostics = {
        "seeds": seeds,
        "seed_records": records,
        "seed_outcomes": dict(outcomes),
        "candidates_found": len(cands.candidates),
        "candidates_failed": len(cands.rejected),
        "candidates_pruned": len(cands.candidates) - len(subspaces),
        "subspace_dims": [s.dim for s in subspaces],
        "timing": timing,
    }
    return PipelineResult(reports, subspaces, diagnostics, m.shape)
