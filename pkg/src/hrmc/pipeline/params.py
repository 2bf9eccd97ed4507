"""Theory-driven sizing of the pipeline (seeds, neighborhoods, overlaps).

All logarithms are natural logarithms.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

__all__ = [
    "PipelineParams",
    "ParamWarning",
    "derive_params",
    "confidence_delta",
    "seed_count",
    "pool_multiplier",
    "overlap_threshold",
    "seed_min_observations",
    "min_sampling_rate",
    "min_columns",
    "practical_seed_count",
    "practical_overrides",
]


class ParamWarning(UserWarning):
    """An input falls short of a sufficient condition of the recovery guarantee."""


def confidence_delta(n: int, beta: float) -> float:
    return n ** (2.0 - 2.0 * math.sqrt(beta)) * math.log(n)


def seed_count(k: int, delta0: float, nu0: float) -> int:
    return math.ceil(k * (math.log(k) + math.log(1.0 / delta0)) / ((1.0 - math.exp(-4.0)) * nu0))


def _ball_mass(nu0: float, eps0: float, r: int) -> float:
    return nu0 * (eps0 / math.sqrt(3.0)) ** r


def pool_multiplier(n: int, k: int, r: int, nu0: float, eps0: float, s0: int, delta0: float) -> int:
    mass = _ball_mass(nu0, eps0, r)
    return math.ceil(max(2.0 * k / mass, 8.0 * k * math.log(s0 / delta0) / (n * mass)))


def overlap_threshold(n: int, mu0: float, s0: int, ell0: int, delta0: float) -> int:
    return math.ceil(2.0 * mu0**2 * math.log(2.0 * s0 * ell0 * n / delta0))


def seed_min_observations(n: int, r: int, mu0: float, mu1: float, nu0: float, beta: float) -> float:
    return 64.0 * beta * max(mu1**2, mu0) * r * math.log(n) ** 2 / nu0


def min_sampling_rate(n: int, r: int, mu0: float, mu1: float, nu0: float, beta: float) -> float:
    return 128.0 * beta * max(mu1**2, mu0) * r * math.log(n) ** 2 / (nu0 * n)


def min_columns(n, s0, ell0, delta0, mu0, p0, exponent_factor=1.0) -> float:
    """ell0 n (2 s0 ell0 n / delta0)^(c mu0^2 log 1/p0); inf on overflow."""
    expo = exponent_factor * mu0**2 * math.log(1.0 / p0)
    try:
        return ell0 * n * (2.0 * s0 * ell0 * n / delta0) ** expo
    except OverflowError:
        return math.inf


def practical_seed_count(k: int) -> int:
    """ceil(3 k log k), the seed budget used for the synthetic experiment."""
    return max(1, math.ceil(3 * k * math.log(k)))


def practical_overrides(n: int, N: int, k: int, r: int) -> dict:
    """Desk-scale replacements for the theory-sized quantities.

    At moderate n the theory values are unusable (eta0 alone exceeds n), so
    seeds, pool, overlap and seed-observation thresholds are set from simple
    multiples of k and r, and each neighborhood is the ``4r`` nearest
    columns. Data with many duplicate columns (hop counts) needs larger
    neighborhoods; pass ``neighborhood_size`` explicitly there.
    """
    return dict(
        seed_count_override=max(practical_seed_count(k), 5 * k),
        eta0=float(min(n, 4 * r)),
        t0=2 * r,
        ell0=max(1, min(40, (N - 1) // n * 4 // 5)),
        neighborhood_size=4 * r,
        neighbor_rule="nearest",
    )


@dataclass(frozen=True)
class PipelineParams:
    n: int
    N: int
    k: int
    r: int
    mu0: float
    mu1: float
    nu0: float
    eps0: float
    beta: float
    p0: float
    delta0: float
    s0: int
    ell0: int
    t0: int
    eta0: float
    p0_min: float
    N_min: float
    N_min_derivation: float
    thinning_enabled: bool = True
    seed_count_override: int | None = None
    # practical-mode knobs; None means "the value the theory prescribes"
    neighborhood_size: int | None = None
    neighbor_rule: str = "ball"
    warnings: tuple = ()

    @property
    def n_seeds(self) -> int:
        return self.seed_count_override if self.seed_count_override is not None else self.s0

    @property
    def members(self) -> int:
        return self.neighborhood_size if self.neighborhood_size is not None else self.n

    def report(self) -> dict:
        d = dataclasses.asdict(self)
        d["warnings"] = list(self.warnings)
        return d


def derive_params(
    n: int,
    N: int,
    k: int,
    r: int,
    mu0: float = 1.0,
    mu1: float = 1.0,
    nu0: float = 0.5,
    eps0: float = 0.25,
    beta: float = 1.5,
    p0: float = 1.0,
    *,
    delta0: float | None = None,
    s0: int | None = None,
    ell0: int | None = None,
    t0: int | None = None,
    eta0: float | None = None,
    seed_count_override: int | None = None,
    thinning_enabled: bool = True,
    neighborhood_size: int | None = None,
    neighbor_rule: str = "ball",
) -> PipelineParams:
    """Fill in every derived quantity from the model constants.

    The keyword-only arguments override individual derived values (practical
    mode); downstream quantities are recomputed from the overrides.
    Unmet sufficient conditions are reported as :class:`ParamWarning`.
    """
    for name, val in (("n", n), ("N", N), ("k", k), ("r", r)):
        if int(val) != val or val < 1:
            raise ValueError(f"{name} must be a positive integer, got {val}")
    if n < 2:
        raise ValueError("n must be at least 2")
    if not r < n:
        raise ValueError(f"r must be smaller than n (r={r}, n={n})")
    if not beta > 1:
        raise ValueError(f"beta must exceed 1, got {beta}")
    if not 0 < eps0 < 1:
        raise ValueError(f"eps0 must lie in (0, 1), got {eps0}")
    if not 0 < nu0 <= 1:
        raise ValueError(f"nu0 must lie in (0, 1], got {nu0}")
    if not 0 < p0 <= 1:
        raise ValueError(f"p0 must lie in (0, 1], got {p0}")
    if mu0 < 1 or mu1 < 1:
        raise ValueError("coherence bounds mu0, mu1 must be >= 1")
    if neighbor_rule not in ("ball", "nearest"):
        raise ValueError("neighbor_rule must be 'ball' or 'nearest'")
    if neighborhood_size is not None and neighborhood_size < 1:
        raise ValueError("neighborhood_size must be positive")

    notes = []
    d0 = confidence_delta(n, beta) if delta0 is None else float(delta0)
    if d0 <= 0:
        raise ValueError("delta0 must be positive")
    if d0 >= 1:
        notes.append(f"delta0 = {d0:.6g} >= 1: the recovery probability bound is vacuous")
    s = seed_count(k, d0, nu0) if s0 is None else int(s0)
    if s < 1:
        # log k + log(1/delta0) < 0 happens only for delta0 > k
        s = 1
    ell = pool_multiplier(n, k, r, nu0, eps0, s, d0) if ell0 is None else int(ell0)
    t = overlap_threshold(n, mu0, s, ell, d0) if t0 is None else int(t0)
    eta = seed_min_observations(n, r, mu0, mu1, nu0, beta) if eta0 is None else float(eta0)
    pmin = min_sampling_rate(n, r, mu0, mu1, nu0, beta)
    nmin = min_columns(n, s, ell, d0, mu0, p0, 1.0)
    nmin2 = min_columns(n, s, ell, d0, mu0, p0, 2.0)

    if p0 < pmin:
        notes.append(f"p0 = {p0:.6g} is below the sufficient sampling rate {pmin:.6g}")
    if N < nmin:
        notes.append(f"N = {N} is below the sufficient column count {nmin:.6g}")
    if eta <= t:
        notes.append(f"eta0 = {eta:.6g} does not exceed t0 = {t}")
    if eta > n:
        notes.append(f"eta0 = {eta:.6g} exceeds n = {n}: no column can qualify as a seed")
    for msg in notes:
        warnings.warn(msg, ParamWarning, stacklevel=2)

    return PipelineParams(
        n=n, N=N, k=k, r=r, mu0=mu0, mu1=mu1, nu0=nu0, eps0=eps0, beta=beta, p0=p0,
        delta0=d0, s0=s, ell0=ell, t0=t, eta0=eta,
        p0_min=pmin, N_min=nmin, N_min_derivation=nmin2,
        thinning_enabled=thinning_enabled,
        seed_count_override=seed_count_override,
        neighborhood_size=neighborhood_size,
        neighbor_rule=neighbor_rule,
        warnings=tuple(notes),
    )
