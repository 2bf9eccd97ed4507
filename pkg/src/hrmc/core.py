"""Linear algebra on partially observed vectors and matrices.

Everything here is a pure function of immutable inputs. Observed data is kept
in coordinate form: a column only ever exposes the rows where it was sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla

from .errors import (
    DegenerateRestrictionError,
    EmptyBasisError,
    UnderdeterminedError,
)

__all__ = [
    "CONDITION_LIMIT",
    "ObservedVector",
    "ObservedMatrix",
    "Subspace",
    "PartialDistance",
    "coherence_subspace",
    "coherence_vector",
    "partial_distance",
    "partial_distances_to",
    "restricted_projection_residual",
    "complete_column",
    "subspace_contained_in",
    "principal_angles",
    "orthonormalize",
]

# Gram matrices U_Ω^T U_Ω with a condition estimate above this are singular.
CONDITION_LIMIT = 1e12

ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True)
class ObservedVector:
    """One column restricted to the rows where it was observed."""

    ambient_dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if idx.shape != vals.shape:
            raise ValueError(
                f"indices ({idx.size}) and values ({vals.size}) differ in length"
            )
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.ambient_dim:
                raise ValueError(f"indices must lie in [0, {self.ambient_dim})")
        idx.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_dense(cls, x, mask=None) -> "ObservedVector":
        x = np.asarray(x, dtype=float).reshape(-1)
        if mask is None:
            mask = np.ones(x.shape, dtype=bool)
        idx = np.flatnonzero(mask)
        return cls(x.size, idx, x[idx])

    @property
    def n_observed(self) -> int:
        return int(self.indices.size)

    def sq_norm(self) -> float:
        return float(self.values @ self.values)


class ObservedMatrix:
    """An ``n_rows x n_cols`` matrix of which only some entries are known.

    Storage is coordinate based (row, col, value) and sorted column-major, so
    extracting a column is a slice. Instances are treated as immutable.

    Parameters
    ----------
    n_rows, n_cols : int
        Matrix shape.
    rows, cols : array_like of int
        Zero-based coordinates of the observed entries.
    values : array_like of float
        Observed values aligned with ``rows``/``cols``.
    """

    def __init__(self, n_rows: int, n_cols: int, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        values = np.asarray(values, dtype=float).reshape(-1)
        if not (rows.size == cols.size == values.size):
            raise ValueError("rows, cols and values must have equal length")
        if n_rows < 0 or n_cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError(f"row index out of range [0, {n_rows})")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError(f"column index out of range [0, {n_cols})")
        order = np.lexsort((rows, cols))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                i = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry at ({rows[i]}, {cols[i]})")
        for a in (rows, cols, values):
            a.setflags(write=False)
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.rows = rows
        self.cols = cols
        self.values = values
        self._indptr = np.searchsorted(cols, np.arange(self.n_cols + 1))
        self._dense = None

    @classmethod
    def from_dense(cls, dense, mask=None) -> "ObservedMatrix":
        dense = np.asarray(dense, dtype=float)
        if mask is None:
            mask = np.ones(dense.shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != dense.shape:
            raise ValueError("mask and matrix shapes differ")
        cols, rows = np.nonzero(mask.T)
        return cls(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def column(self, j: int) -> ObservedVector:
        lo, hi = self._indptr[j], self._indptr[j + 1]
        return ObservedVector(self.n_rows, self.rows[lo:hi], self.values[lo:hi])

    def column_counts(self) -> np.ndarray:
        return np.diff(self._indptr)

    def row_counts(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n_rows)

    def entries(self) -> dict[tuple[int, int], float]:
        return {
            (int(i), int(j)): float(v)
            for i, j, v in zip(self.rows, self.cols, self.values)
        }

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.rows, self.cols] = True
        return m

    def to_dense(self, fill: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(values, mask)``; unobserved cells hold ``fill``."""
        out = np.full(self.shape, fill, dtype=float)
        out[self.rows, self.cols] = self.values
        return out, self.mask()

    def dense_view(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached read-only ``(values, mask)`` with zeros at unobserved cells."""
        if self._dense is None:
            vals, mask = self.to_dense()
            vals.setflags(write=False)
            mask.setflags(write=False)
            self._dense = (vals, mask)
        return self._dense

    def select_columns(self, cols: Sequence[int]) -> "ObservedMatrix":
        """Submatrix made of ``cols`` in the given order (renumbered 0..)."""
        cols = np.asarray(cols, dtype=np.int64)
        parts_r, parts_c, parts_v = [], [], []
        for new, j in enumerate(cols):
            lo, hi = self._indptr[j], self._indptr[j + 1]
            parts_r.append(self.rows[lo:hi])
            parts_c.append(np.full(hi - lo, new, dtype=np.int64))
            parts_v.append(self.values[lo:hi])
        if not parts_r:
            return ObservedMatrix(self.n_rows, 0, [], [], [])
        return ObservedMatrix(
            self.n_rows,
            cols.size,
            np.concatenate(parts_r),
            np.concatenate(parts_c),
            np.concatenate(parts_v),
        )

    def __eq__(self, other):
        if not isinstance(other, ObservedMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"ObservedMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def orthonormalize(a, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for the column span of ``a`` (rank-revealing)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((a.shape[0], 0))
    keep = s > tol * s[0] * max(a.shape)
    return u[:, keep]


@dataclass(frozen=True)
class Subspace:
    """Subspace of R^n held as an orthonormal ``n x d`` basis."""

    basis: np.ndarray
    ambient_dim: int = field(default=-1)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.ndim != 2:
            raise ValueError("basis must be a 2-D array")
        if self.ambient_dim == -1:
            object.__setattr__(self, "ambient_dim", b.shape[0])
        elif b.shape[0] != self.ambient_dim:
            raise ValueError("basis rows must equal ambient_dim")
        if b.shape[1]:
            err = np.linalg.norm(b.T @ b - np.eye(b.shape[1]))
            if err > ORTHONORMAL_TOL:
                raise ValueError(f"basis is not orthonormal (error {err:.3g})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, *vectors) -> "Subspace":
        """Subspace spanned by the given vectors (or by the columns of one array)."""
        if len(vectors) == 1:
            a = np.asarray(vectors[0], dtype=float)
        else:
            a = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
        return cls(orthonormalize(a))

    @property
    def dim(self) -> int:
        return int(self.basis.shape[1])

    def project(self, x) -> np.ndarray:
        return self.basis @ (self.basis.T @ np.asarray(x, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.basis.shape == other.basis.shape and np.array_equal(
            self.basis, other.basis
        )

    def __hash__(self):
        return hash((self.basis.shape, self.basis.tobytes()))


@dataclass(frozen=True)
class PartialDistance:
    """Rescaled squared distance over the commonly observed rows.

    ``estimate`` is None when the overlap fell short of the requested minimum.
    """

    overlap_count: int
    estimate: float | None

    @property
    def sufficient(self) -> bool:
        return self.estimate is not None


def coherence_subspace(s: Subspace) -> float:
    """(n/d) * max_j ||P_S e_j||^2, which lies in [1, n/d]."""
    if s.dim == 0:
        raise EmptyBasisError("empty basis")
    leverage = np.einsum("ij,ij->i", s.basis, s.basis)
    return float(s.ambient_dim / s.dim * leverage.max())


def coherence_vector(x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    sq = float(x @ x)
    if sq == 0.0:
        raise ValueError("zero vector has undefined coherence")
    return float(x.size * np.max(np.abs(x)) ** 2 / sq)


def partial_distance(x1: ObservedVector, x2: ObservedVector, min_overlap: int = 1) -> PartialDistance:
    if x1.ambient_dim != x2.ambient_dim:
        raise ValueError("vectors live in different ambient dimensions")
    common, i1, i2 = np.intersect1d(
        x1.indices, x2.indices, assume_unique=True, return_indices=True
    )
    q = int(common.size)
    if q == 0 or q < min_overlap:
        return PartialDistance(q, None)
    y = x1.values[i1] - x2.values[i2]
    return PartialDistance(q, float(x1.ambient_dim / q * (y @ y)))


def partial_distances_to(m: ObservedMatrix, j: int, cols=None, min_overlap: int = 1):
    """Partial distances from column ``j`` of ``m`` to each column in ``cols``.

    Vectorized counterpart of :func:`partial_distance`. Returns
    ``(overlap_counts, estimates)`` with NaN estimates where the overlap is
    below ``min_overlap`` (or zero).
    """
    vals, mask = m.dense_view()
    if cols is None:
        cols = np.arange(m.n_cols)
    cols = np.asarray(cols, dtype=np.int64)
    support = mask[:, j]
    sub_mask = mask[support][:, cols]
    q = sub_mask.sum(axis=0)
    diff = (vals[support][:, cols] - vals[support, j][:, None]) * sub_mask
    with np.errstate(divide="ignore", invalid="ignore"):
        est = m.n_rows / q * np.einsum("ij,ij->j", diff, diff)
    est[(q < max(min_overlap, 1))] = np.nan
    return q, est


def _restricted_fit(x: ObservedVector, s: Subspace):
    """QR least-squares fit of x_Ω on U_Ω; returns (weights, fitted x_Ω)."""
    if x.ambient_dim != s.ambient_dim:
        raise ValueError("vector and subspace differ in ambient dimension")
    if s.dim == 0:
        raise EmptyBasisError("empty basis")
    if x.n_observed < s.dim:
        raise UnderdeterminedError(
            f"{x.n_observed} observations cannot determine {s.dim} weights"
        )
    u_omega = s.basis[x.indices]
    q, r = sla.qr(u_omega, mode="economic")
    # cond(U_Ω^T U_Ω) = cond(R)^2
    d = np.abs(np.diag(r))
    if d.min() == 0.0 or np.linalg.cond(r) ** 2 > CONDITION_LIMIT:
        raise DegenerateRestrictionError(
            "restricted basis is numerically singular"
        )
    qtx = q.T @ x.values
    w = sla.solve_triangular(r, qtx)
    return w, q @ qtx


def restricted_projection_residual(x: ObservedVector, s: Subspace) -> float:
    """||x_Ω - P_{Ω,S} x_Ω||^2 via a QR least-squares solve."""
    if x.n_observed == 0:
        raise UnderdeterminedError("no observed entries")
    _, fitted = _restricted_fit(x, s)
    res = x.values - fitted
    return float(res @ res)


def complete_column(x: ObservedVector, s: Subspace) -> np.ndarray:
    """Fill in ``x`` from ``s``: U (U_Ω^T U_Ω)^{-1} U_Ω^T x_Ω."""
    if x.n_observed == 0:
        raise UnderdeterminedError("no observed entries")
    w, _ = _restricted_fit(x, s)
    return s.basis @ w


def _default_containment_tol(s: Subspace) -> float:
    return 1e-8 * math.sqrt(max(s.dim, 1))


def subspace_contained_in(s: Subspace, others: Iterable[Subspace], tol: float | None = None) -> bool:
    """True iff ``s`` lies in the span of the union of ``others``."""
    others = list(others)
    if tol is None:
        tol = _default_containment_tol(s)
    if s.dim == 0:
        return True
    if not others:
        return False
    for o in others:
        if o.ambient_dim != s.ambient_dim:
            raise ValueError("subspaces differ in ambient dimension")
    w = orthonormalize(np.hstack([o.basis for o in others]))
    resid = s.basis - w @ (w.T @ s.basis)
    return bool(np.linalg.norm(resid) <= tol)


def principal_angles(a: Subspace, b: Subspace) -> np.ndarray:
    """Principal angles (radians, ascending) between two subspaces."""
    return np.sort(sla.subspace_angles(a.basis, b.basis))
