"""Simulation helpers shared by the unit and acceptance tests."""

import numpy as np
from scipy import stats

from hrmc.core import ObservedMatrix
from hrmc.pipeline import thin_neighborhood
from hrmc.pipeline.neighborhoods import Neighborhood, binomial_pmf


def simulate_thinning(t, p0, q, trials, seed):
    """Members with a truncated-binomial on-support count, then thinned."""
    rng = np.random.default_rng(seed)
    pmf = binomial_pmf(t, p0)[q:]
    counts = q + rng.choice(pmf.size, size=trials, p=pmf / pmf.sum())
    rows, cols = [], []
    for j, c in enumerate(counts):
        r = rng.choice(t, size=c, replace=False)
        rows.extend(r.tolist())
        cols.extend([j] * c)
    sub = ObservedMatrix(t, trials, rows, cols, np.ones(len(rows)))
    nb = Neighborhood(-1, np.arange(trials), sub, np.arange(t), np.zeros(trials))
    out = thin_neighborhood(nb, np.arange(t), p0, q, rng)
    return out.submatrix.column_counts()


def chi_square_pvalue(counts, t, p0):
    observed = np.bincount(counts, minlength=t + 1).astype(float)
    expected = stats.binom.pmf(np.arange(t + 1), t, p0) * counts.size
    # pool sparse cells so every expected count is >= 5
    obs_b, exp_b, o, e = [], [], 0.0, 0.0
    for oi, ei in zip(observed, expected):
        o, e = o + oi, e + ei
        if e >= 5:
            obs_b.append(o)
            exp_b.append(e)
            o = e = 0.0
    obs_b[-1] += o
    exp_b[-1] += e
    return stats.chisquare(obs_b, exp_b).pvalue
