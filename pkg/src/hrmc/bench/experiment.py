"""Sweeps comparing the union-of-subspaces pipeline with whole-matrix completion."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..datagen import HopModelConfig, apply_bernoulli_mask, gen_hopcount_matrix, gen_union_of_subspaces
from ..errors import HRMCError
from ..lowrank import SolverConfig, complete_lowrank
from ..pipeline import PipelineConfig, complete_matrix, derive_params, practical_overrides, practical_seed_count

__all__ = [
    "HIGHRANK",
    "LOWRANK",
    "ExperimentSpec",
    "TrialRecord",
    "ExperimentResult",
    "ErrorCDF",
    "run_experiment",
    "score_columns",
    "error_cdf",
    "synthetic_spec",
    "network_spec",
]

log = logging.getLogger(__name__)

HIGHRANK = "highrank"
LOWRANK = "lowrank"
METHODS = (HIGHRANK, LOWRANK)
AXES = ("samples_per_column", "p0")
DEFAULT_GRID = (20, 30, 40, 50, 60, 80, 120, 200, 400)


def score_columns(completed, truth, tol: float) -> int:
    """Number of columns whose largest absolute entry error is <= ``tol``.

    Columns containing NaN (not completed) never count.
    """
    completed = np.asarray(completed, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if completed.shape != truth.shape:
        raise ValueError(f"shape mismatch {completed.shape} vs {truth.shape}")
    err = np.abs(completed - truth)
    err[np.isnan(err)] = np.inf
    return int(np.sum(err.max(axis=0, initial=0.0) <= tol))


@dataclass(frozen=True)
class ErrorCDF:
    """Empirical CDF of absolute errors over the unobserved entries."""

    errors: np.ndarray
    fractions: np.ndarray
    note: str = ""

    def at(self, x: float) -> float:
        """Fraction of errors <= x (0 for an empty CDF)."""
        if self.errors.size == 0:
            return 0.0
        return float(np.searchsorted(self.errors, x, side="right") / self.errors.size)

    def sampled(self, points: int = 201):
        """(error, fraction) pairs at evenly spaced cumulative fractions."""
        if self.errors.size == 0:
            return []
        idx = np.unique(np.linspace(0, self.errors.size - 1, points).round().astype(int))
        return list(zip(self.errors[idx].tolist(), self.fractions[idx].tolist()))


def error_cdf(completed, truth, mask) -> ErrorCDF:
    """CDF of |completed - truth| on entries where ``mask`` is False.

    NaN completions count as infinite error.
    """
    completed = np.asarray(completed, dtype=float)
    truth = np.asarray(truth, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not (completed.shape == truth.shape == mask.shape):
        raise ValueError("completed, truth and mask must share a shape")
    err = np.abs(completed[~mask] - truth[~mask])
    if err.size == 0:
        return ErrorCDF(np.zeros(0), np.zeros(0), note="no missing entries")
    err[np.isnan(err)] = np.inf
    err.sort()
    return ErrorCDF(err, np.arange(1, err.size + 1) / err.size)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: generator, sampling grid, methods and scoring.

    ``pipeline_overrides`` are passed to :func:`derive_params` (practical
    mode). The baseline fits the whole matrix at rank ``k * r``.
    """

    generator: str = "union"
    n: int = 100
    N: int = 5000
    k: int = 10
    r: int = 5
    hop: HopModelConfig = field(default_factory=HopModelConfig)
    sweep_axis: str = "samples_per_column"
    grid: tuple = (60,)
    methods: tuple = METHODS
    tolerances: tuple = (1e-5, 0.01)
    trials: int = 1
    seed: int = 0
    integer_rounding: bool = False
    pipeline_overrides: dict = field(default_factory=dict)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    baseline: SolverConfig = field(
        default_factory=lambda: SolverConfig(rank_search="max", max_restarts=0)
    )
    threads: int = 1

    def __post_init__(self):
        if self.generator not in ("union", "hopcount"):
            raise ValueError("generator must be 'union' or 'hopcount'")
        if self.sweep_axis not in AXES:
            raise ValueError(f"sweep_axis must be one of {AXES}")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"methods must be drawn from {METHODS}")
        for v in self.grid:
            p = self.sampling_rate(v)
            if not 0 < p <= 1:
                raise ValueError(f"grid value {v} gives sampling rate {p} outside (0, 1]")

    def sampling_rate(self, value) -> float:
        return value / self.n if self.sweep_axis == "samples_per_column" else float(value)


@dataclass
class TrialRecord:
    method: str
    sweep_value: float
    trial: int
    correct: dict
    n_columns: int
    exact_fraction: float
    runtime: float
    cdf: ErrorCDF | None = None
    failure: str | None = None
    statuses: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: list

    def select(self, method=None, sweep_value=None):
        return [
            r for r in self.records
            if (method is None or r.method == method)
            and (sweep_value is None or r.sweep_value == sweep_value)
        ]

    def mean_correct(self, method, sweep_value, tol) -> float:
        recs = self.select(method, sweep_value)
        return float(np.mean([r.correct[tol] for r in recs]))

    def pooled_cdf(self, method, sweep_value) -> ErrorCDF:
        errs = [r.cdf.errors for r in self.select(method, sweep_value) if r.cdf is not None]
        if not errs:
            return ErrorCDF(np.zeros(0), np.zeros(0), note="no records")
        e = np.sort(np.concatenate(errs))
        if e.size == 0:
            return ErrorCDF(e, e, note="no missing entries")
        return ErrorCDF(e, np.arange(1, e.size + 1) / e.size)


def _truth(spec: ExperimentSpec, rng):
    if spec.generator == "union":
        return gen_union_of_subspaces(spec.n, spec.N, spec.k, spec.r, rng)
    return gen_hopcount_matrix(spec.n, spec.N, spec.k, spec.hop, rng)


def _run_method(spec, method, obs, p0, seq):
    if method == HIGHRANK:
        import warnings

        from ..pipeline import ParamWarning

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ParamWarning)
            params = derive_params(spec.n, spec.N, spec.k, spec.r, p0=p0, **spec.pipeline_overrides)
        res = complete_matrix(obs, params, spec.pipeline, seed=seq)
        return res.completed_matrix(obs), res.status_counts
    res = complete_lowrank(obs, spec.k * spec.r, spec.baseline, np.random.default_rng(seq))
    return res.completed, {"converged": int(res.converged)}


def _one_trial(spec: ExperimentSpec, point: int, value, trial: int):
    truth_seq = np.random.SeedSequence([spec.seed, trial])
    truth = _truth(spec, np.random.default_rng(truth_seq))
    mask_seq, *method_seqs = np.random.SeedSequence([spec.seed, trial, point]).spawn(1 + len(METHODS))
    p0 = spec.sampling_rate(value)
    obs = apply_bernoulli_mask(truth, p0, np.random.default_rng(mask_seq))
    mask = obs.mask()
    out = []
    for method in spec.methods:
        seq = method_seqs[METHODS.index(method)]
        t = time.perf_counter()
        failure = None
        statuses = {}
        try:
            completed, statuses = _run_method(spec, method, obs, p0, seq)
        except HRMCError as exc:
            failure = str(exc)
            completed = np.full(truth.shape, np.nan)
            completed[mask] = truth.full_matrix[mask]
        runtime = time.perf_counter() - t
        if spec.integer_rounding:
            completed = np.round(completed)
        cdf = error_cdf(completed, truth.full_matrix, mask)
        correct = {tol: score_columns(completed, truth.full_matrix, tol) for tol in spec.tolerances}
        exact = cdf.at(0.0) if cdf.errors.size else 1.0
        log.info("%s %s=%s trial %d: correct %s exact %.3f (%.1fs)",
                 method, spec.sweep_axis, value, trial, correct, exact, runtime)
        out.append(TrialRecord(method, value, trial, correct, truth.shape[1], exact,
                               runtime, cdf, failure, statuses))
    return out


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every (sweep point, trial) and score each method.

    Each trial's ground truth depends only on ``(seed, trial)``, and its mask
    only on ``(seed, trial, point)``, so the methods see identical inputs and
    results do not depend on ``spec.threads``. Method failures are recorded
    per trial; the sweep always runs to the end.
    """
    jobs = [(p, v, t) for p, v in enumerate(spec.grid) for t in range(spec.trials)]
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as ex:
            chunks = list(ex.map(lambda j: _one_trial(spec, *j), jobs))
    else:
        chunks = [_one_trial(spec, *j) for j in jobs]
    return ExperimentResult(spec, [r for chunk in chunks for r in chunk])


# Practical settings: the theory constants are far from desk scale (eta0
# alone exceeds n), so seeds, pool size, overlap and neighborhood size are set
# directly and members are the nearest columns by partial distance.
def synthetic_spec(**kw) -> ExperimentSpec:
    n, N, k, r = (kw.get(key, d) for key, d in (("n", 100), ("N", 5000), ("k", 10), ("r", 5)))
    base = dict(
        generator="union", n=n, N=N, k=k, r=r,
        sweep_axis="samples_per_column", grid=tuple(v for v in DEFAULT_GRID if v <= n),
        tolerances=(1e-5, 0.01), trials=5,
        pipeline_overrides=practical_overrides(n, N, k, r),
    )
    base.update(kw)
    return ExperimentSpec(**base)


def network_spec(**kw) -> ExperimentSpec:
    k = kw.get("k", 12)
    # hosts sharing a subnet and a border distance give identical columns;
    # small neighborhoods then fit rank-1 lines nested in the true planes
    base = dict(
        generator="hopcount", n=75, N=2700, k=k, r=2,
        sweep_axis="p0", grid=(0.4,), tolerances=(0.0, 1.0), trials=3,
        integer_rounding=True,
        pipeline_overrides=dict(
            seed_count_override=practical_seed_count(k), ell0=30, t0=8, eta0=8,
            neighborhood_size=75, neighbor_rule="nearest",
        ),
    )
    base.update(kw)
    return ExperimentSpec(**base)


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    return replace(spec, **kw)
