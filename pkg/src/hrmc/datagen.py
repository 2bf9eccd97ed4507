"""Ground-truth generators: Gaussian unions of subspaces and subnet hop counts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ObservedMatrix, Subspace, orthonormalize

__all__ = [
    "GroundTruth",
    "HopModelConfig",
    "gen_union_of_subspaces",
    "gen_hopcount_matrix",
    "apply_bernoulli_mask",
    "split_counts",
]


@dataclass(frozen=True)
class GroundTruth:
    full_matrix: np.ndarray
    labels: np.ndarray
    subspaces: list
    model_meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.full_matrix.shape


def split_counts(total: int, parts: int) -> np.ndarray:
    """Split ``total`` as evenly as possible; the first parts get the remainder."""
    base, extra = divmod(total, parts)
    return np.array([base + (i < extra) for i in range(parts)], dtype=int)


def _smallest_angle(a: np.ndarray, b: np.ndarray) -> float:
    s = np.linalg.svd(a.T @ b, compute_uv=False)
    return float(np.arccos(np.clip(s.max(), -1.0, 1.0)))


def gen_union_of_subspaces(
    n: int,
    N: int,
    k: int,
    r: int,
    rng: np.random.Generator,
    min_angle: float = 0.2,
    normalize: str = "unit",
    max_tries: int = 1000,
) -> GroundTruth:
    """Columns drawn from ``k`` random ``r``-dimensional subspaces of R^n.

    Each subspace is the span of ``r`` standard Gaussian vectors; its columns
    are ``U g`` with ``g ~ N(0, I_r)``, split as evenly as possible over the
    subspaces and shuffled. Draws whose smallest pairwise principal angle is
    below ``min_angle`` are rejected. ``normalize="unit"`` rescales every
    column to unit norm, ``"max"`` divides all columns by the largest norm,
    ``"none"`` leaves them alone.
    """
    if not (1 <= r < n) or k < 1 or N < 1:
        raise ValueError(f"invalid dimensions n={n}, N={N}, k={k}, r={r}")
    if normalize not in ("unit", "max", "none"):
        raise ValueError("normalize must be 'unit', 'max' or 'none'")
    bases = []
    tries = 0
    while len(bases) < k:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not draw well separated subspaces")
        u = np.linalg.qr(rng.standard_normal((n, r)))[0]
        if all(_smallest_angle(u, b) >= min_angle for b in bases):
            bases.append(u)
    counts = split_counts(N, k)
    labels = np.repeat(np.arange(k), counts)
    labels = labels[rng.permutation(N)]
    X = np.empty((n, N))
    for i, u in enumerate(bases):
        cols = np.flatnonzero(labels == i)
        X[:, cols] = u @ rng.standard_normal((r, cols.size))
    if normalize == "unit":
        X /= np.linalg.norm(X, axis=0)
    elif normalize == "max":
        X /= np.linalg.norm(X, axis=0).max()
    meta = dict(model="union", n=n, N=N, k=k, r=r, min_angle=min_angle, normalize=normalize)
    return GroundTruth(X, labels, [Subspace(u) for u in bases], meta)


@dataclass(frozen=True)
class HopModelConfig:
    """Hop-count model settings.

    ``backend="direct"`` draws each subnet's border-router hop vector
    uniformly from ``border_hops`` and each host's extra hops from
    ``host_offsets`` (inclusive integer ranges). ``backend="graph"`` builds a
    random preferential-attachment router graph and takes BFS hop counts from
    each subnet's border router to the monitors.
    """

    backend: str = "direct"
    border_hops: tuple = (5, 30)
    host_offsets: tuple = (1, 5)
    n_routers: int = 600
    attach_edges: int = 2
    max_retries: int = 10

    def __post_init__(self):
        if self.backend not in ("direct", "graph"):
            raise ValueError("backend must be 'direct' or 'graph'")
        for lo, hi in (self.border_hops, self.host_offsets):
            if lo > hi or lo < 0:
                raise ValueError("ranges must be nonnegative (lo, hi) with lo <= hi")


def _graph_border_hops(n_monitors, k_subnets, cfg, rng):
    import networkx as nx

    if cfg.n_routers < n_monitors + k_subnets:
        raise ValueError("n_routers must exceed n_monitors + k_subnets")
    for _ in range(cfg.max_retries):
        g = nx.barabasi_albert_graph(cfg.n_routers, cfg.attach_edges, seed=int(rng.integers(2**31)))
        if nx.is_connected(g):
            break
    else:
        raise RuntimeError(f"router graph disconnected after {cfg.max_retries} retries")
    nodes = rng.permutation(cfg.n_routers)
    monitors = nodes[:n_monitors]
    # border routers sit at the edge of the core: pick among low-degree nodes
    rest = nodes[n_monitors:]
    deg = np.array([g.degree(int(v)) for v in rest])
    border = rest[np.argsort(deg, kind="stable")[:k_subnets]]
    hops = np.empty((n_monitors, k_subnets))
    for s, b in enumerate(border):
        dist = nx.single_source_shortest_path_length(g, int(b))
        hops[:, s] = [dist[int(v)] for v in monitors]
    return hops, dict(monitors=monitors.tolist(), border_routers=border.tolist())


def gen_hopcount_matrix(
    n_monitors: int,
    N_hosts: int,
    k_subnets: int,
    cfg: HopModelConfig | None = None,
    rng: np.random.Generator | None = None,
) -> GroundTruth:
    """Hop counts from ``N_hosts`` hosts (grouped in subnets) to monitors.

    A host ``i`` in subnet ``s`` sees monitor ``m`` at ``b_s[m] + d_i`` hops,
    where ``b_s`` is the border router's hop vector and ``d_i`` the host's
    distance to its border router, so every subnet block has rank <= 2.
    Hosts are spread uniformly over subnets.
    """
    cfg = cfg or HopModelConfig()
    if rng is None:
        rng = np.random.default_rng(0)
    if min(n_monitors, N_hosts, k_subnets) < 1:
        raise ValueError("counts must be positive")
    extra = {}
    if cfg.backend == "direct":
        lo, hi = cfg.border_hops
        border = rng.integers(lo, hi + 1, size=(n_monitors, k_subnets)).astype(float)
    else:
        border, extra = _graph_border_hops(n_monitors, k_subnets, cfg, rng)
    labels = np.repeat(np.arange(k_subnets), split_counts(N_hosts, k_subnets))
    labels = labels[rng.permutation(N_hosts)]
    lo, hi = cfg.host_offsets
    offsets = rng.integers(lo, hi + 1, size=N_hosts).astype(float)
    X = border[:, labels] + offsets[None, :]
    ones = np.ones(n_monitors)
    subspaces = [Subspace(orthonormalize(np.column_stack([border[:, s], ones])))
                 for s in range(k_subnets)]
    meta = dict(model="hopcount", backend=cfg.backend, n=n_monitors, N=N_hosts,
                k=k_subnets, r=2, border_hops=list(cfg.border_hops),
                host_offsets=list(cfg.host_offsets), **extra)
    return GroundTruth(X, labels, subspaces, meta)


def apply_bernoulli_mask(truth, p0: float, rng: np.random.Generator) -> ObservedMatrix:
    """Keep each entry independently with probability ``p0``."""
    if not 0 < p0 <= 1:
        raise ValueError("p0 must lie in (0, 1]")
    X = truth.full_matrix if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=float)
    mask = rng.random(X.shape) < p0
    return ObservedMatrix.from_dense(X, mask)
