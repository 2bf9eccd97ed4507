"""CSV tables and matplotlib figures for experiment results."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..io import atomic_write, write_csv
from .experiment import ExperimentResult

__all__ = ["results_rows", "cdf_rows", "write_results", "plot_correct", "plot_cdf", "write_report"]

RESULT_HEADER = ["method", "sweep_axis", "sweep_value", "trial", "tolerance", "correct",
                 "n_columns", "exact_fraction", "failure"]


def _val(v):
    return float(v)


def results_rows(res: ExperimentResult, timings: bool = False):
    rows = []
    for r in res.records:
        for tol in res.spec.tolerances:
            row = [r.method, res.spec.sweep_axis, _val(r.sweep_value), r.trial, float(tol),
                   r.correct[tol], r.n_columns, float(r.exact_fraction), r.failure or ""]
            if timings:
                row.append(float(r.runtime))
            rows.append(row)
    return rows


def cdf_rows(res: ExperimentResult, points: int = 201):
    """Pooled-over-trials CDF sampled at evenly spaced cumulative fractions."""
    rows = []
    for method in res.spec.methods:
        for v in res.spec.grid:
            cdf = res.pooled_cdf(method, v)
            rows.append([method, _val(v), 0.0, cdf.at(0.0)])
            rows.extend([method, _val(v), e, f] for e, f in cdf.sampled(points))
    return rows


def write_results(res: ExperimentResult, outdir, timings: bool = False) -> list[Path]:
    outdir = Path(outdir)
    header = RESULT_HEADER + (["runtime_s"] if timings else [])
    a = outdir / "results.csv"
    b = outdir / "cdf.csv"
    write_csv(a, header, results_rows(res, timings))
    write_csv(b, ["method", "sweep_value", "error", "cumulative_fraction"], cdf_rows(res))
    return [a, b]


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed ids and no timestamp so repeated runs give identical files
    matplotlib.rcParams["svg.hashsalt"] = "hrmc"
    fig, ax = plt.subplots(figsize=(6, 4))
    return plt, fig, ax


def _save(plt, fig, path):
    with atomic_write(path, "wb") as fh:
        fig.savefig(fh, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_correct(res: ExperimentResult, path) -> Path:
    """Mean correctly completed columns against the sweep value."""
    plt, fig, ax = _figure()
    spec = res.spec
    xs = np.array(spec.grid, dtype=float)
    for method in spec.methods:
        for tol in spec.tolerances:
            ys = [res.mean_correct(method, v, tol) for v in spec.grid]
            ax.plot(xs, ys, marker="o", label=f"{method}, tol {tol:g}")
    ax.set_xlabel(spec.sweep_axis.replace("_", " "))
    ax.set_ylabel("correct columns (mean over trials)")
    ax.set_ylim(bottom=0)
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(plt, fig, path)
    return Path(path)


def plot_cdf(res: ExperimentResult, path, sweep_value=None) -> Path:
    """Error CDF on missing entries, pooled over trials, at one sweep point."""
    spec = res.spec
    v = spec.grid[-1] if sweep_value is None else sweep_value
    plt, fig, ax = _figure()
    for method in spec.methods:
        cdf = res.pooled_cdf(method, v)
        if cdf.errors.size == 0:
            continue
        e = np.minimum(cdf.errors, np.finfo(float).max)
        ax.step(np.concatenate([[0.0], e]), np.concatenate([[cdf.at(0.0)], cdf.fractions]),
                where="post", label=method)
    ax.set_xlabel("absolute error")
    ax.set_ylabel("fraction of missing entries")
    ax.set_xscale("symlog", linthresh=1e-6)
    ax.set_ylim(0, 1.02)
    ax.set_title(f"{spec.sweep_axis.replace('_', ' ')} = {v:g}")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(plt, fig, path)
    return Path(path)


def write_report(res: ExperimentResult, outdir, timings: bool = False, plots: bool = True):
    """Write results.csv, cdf.csv and (optionally) the two SVG figures."""
    outdir = Path(outdir)
    paths = write_results(res, outdir, timings)
    if plots:
        paths.append(plot_correct(res, outdir / "correct.svg"))
        paths.append(plot_cdf(res, outdir / "cdf.svg"))
    return paths
