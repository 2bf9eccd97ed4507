"""Per-column subspace assignment and completion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ObservedVector, Subspace, complete_column, restricted_projection_residual
from ..errors import DegenerateRestrictionError, UnderdeterminedError

__all__ = [
    "COMPLETED",
    "AMBIGUOUS",
    "INSUFFICIENT",
    "DEGENERATE",
    "CompletionReport",
    "assign_column",
    "complete_one",
]

COMPLETED = "completed"
AMBIGUOUS = "ambiguous"
INSUFFICIENT = "insufficient-samples"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CompletionReport:
    column: int
    assigned_subspace: int | None
    residuals: tuple
    completed: np.ndarray | None
    status: str


def assign_column(x: ObservedVector, subspaces, assign_tol: float = 1e-8):
    """Find the one subspace whose restricted residual vanishes.

    Returns ``(index, residuals, status)``. A subspace passes when its
    residual is at most ``assign_tol * ||x_Ω||^2``; a degenerate restriction
    counts as a miss (residual ``inf``). ``index`` is None unless exactly one
    subspace passes.
    """
    subspaces = list(subspaces)
    if not subspaces:
        raise ValueError("no subspaces to assign to")
    if x.n_observed == 0:
        return None, tuple(math.inf for _ in subspaces), INSUFFICIENT
    residuals = []
    for s in subspaces:
        try:
            residuals.append(restricted_projection_residual(x, s))
        except (DegenerateRestrictionError, UnderdeterminedError):
            residuals.append(math.inf)
    residuals = tuple(residuals)
    limit = assign_tol * x.sq_norm()
    hits = [i for i, v in enumerate(residuals) if v <= limit]
    if len(hits) == 1:
        return hits[0], residuals, COMPLETED
    if not hits and all(math.isinf(v) for v in residuals):
        return None, residuals, DEGENERATE
    return None, residuals, AMBIGUOUS


def complete_one(j: int, x: ObservedVector, subspaces, assign_tol: float = 1e-8) -> CompletionReport:
    idx, residuals, status = assign_column(x, subspaces, assign_tol)
    if idx is None:
        return CompletionReport(j, None, residuals, None, status)
    try:
        full = complete_column(x, subspaces[idx])
    except (DegenerateRestrictionError, UnderdeterminedError):
        return CompletionReport(j, None, residuals, None, DEGENERATE)
    # observed entries are known exactly; keep them verbatim
    full[x.indices] = x.values
    return CompletionReport(j, idx, residuals, full, COMPLETED)
