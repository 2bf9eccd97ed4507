import warnings

import numpy as np
import pytest
from scipy import stats

from helpers import chi_square_pvalue, simulate_thinning

from hrmc.core import ObservedMatrix
from hrmc.datagen import gen_union_of_subspaces
from hrmc.errors import InsufficientSeedsError, NeighborhoodError
from hrmc.pipeline import ParamWarning, derive_params, form_neighborhood, select_seeds, thin_neighborhood
from hrmc.pipeline.neighborhoods import (
    OVERLAP_POOL,
    SPARSE_BALL,
    Neighborhood,
    binomial_pmf,
    retention_probability,
)


def params(n, N, k=2, r=1, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParamWarning)
        return derive_params(n, N, k, r, **kw)


def test_select_seeds_full_matrix_reproducible():
    m = ObservedMatrix.from_dense(np.ones((5, 30)))
    p = params(5, 30, s0=5, eta0=1)
    a = select_seeds(m, p, np.random.default_rng(4))
    b = select_seeds(m, p, np.random.default_rng(4))
    assert a == b and len(set(a)) == 5


def test_select_seeds_insufficient():
    mask = np.zeros((5, 10), bool)
    mask[:, :3] = True
    mask[0, 3:] = True
    m = ObservedMatrix.from_dense(np.ones((5, 10)), mask)
    with pytest.raises(InsufficientSeedsError, match="found 3, need 5") as exc:
        select_seeds(m, params(5, 10, s0=5, eta0=4), np.random.default_rng(0))
    assert exc.value.achieved == 3


def test_select_seeds_override_count():
    truth = gen_union_of_subspaces(100, 500, 10, 5, np.random.default_rng(0))
    m = ObservedMatrix.from_dense(truth.full_matrix)
    p = params(100, 500, 10, 5, seed_count_override=70, eta0=10)
    assert len(select_seeds(m, p, np.random.default_rng(0))) == 70


def two_lines(n=6, N=60, seed=0):
    rng = np.random.default_rng(seed)
    truth = gen_union_of_subspaces(n, N, 2, 1, rng, min_angle=1.0)
    return truth, ObservedMatrix.from_dense(truth.full_matrix)


def test_ball_neighborhood_is_pure_on_full_data():
    truth, m = two_lines()
    # unit columns on a line are +-u; 0.9 keeps only the seed's own sign
    p = params(6, 60, eps0=0.9, ell0=5, t0=2, eta0=3, neighborhood_size=5)
    seed = 0
    nb = form_neighborhood(m, seed, p, np.random.default_rng(1))
    assert seed not in nb.member_cols
    assert np.all(truth.labels[nb.member_cols] == truth.labels[seed])
    assert nb.submatrix.n_cols == 5
    assert np.all(nb.distances < 0.9**2 / 2)


def test_members_satisfy_filters(rng):
    truth = gen_union_of_subspaces(12, 300, 3, 2, rng)
    mask = rng.random(truth.shape) < 0.7
    m = ObservedMatrix.from_dense(truth.full_matrix, mask)
    p = params(12, 300, 3, 2, ell0=10, t0=4, eta0=6, neighborhood_size=10,
               neighbor_rule="nearest")
    for seed in range(5):
        nb = form_neighborhood(m, seed, p, rng)
        support = set(nb.seed_support.tolist())
        for j in nb.member_cols:
            overlap = support & set(m.column(int(j)).indices.tolist())
            assert len(overlap) >= p.t0
        assert seed not in nb.member_cols


def test_neighborhood_errors():
    _, m = two_lines(N=20)
    with pytest.raises(NeighborhoodError, match=OVERLAP_POOL):
        form_neighborhood(m, 0, params(6, 20, ell0=10, t0=2, eta0=3), np.random.default_rng(0))
    with pytest.raises(NeighborhoodError, match=SPARSE_BALL):
        form_neighborhood(m, 0, params(6, 20, eps0=0.01, ell0=3, t0=2, eta0=3, neighborhood_size=15),
                          np.random.default_rng(0))


def test_binomial_pmf_matches_scipy():
    for t, p in [(10, 0.5), (20, 0.3), (15, 0.8), (0, 0.4)]:
        np.testing.assert_allclose(binomial_pmf(t, p), stats.binom.pmf(np.arange(t + 1), t, p),
                                   rtol=1e-12, atol=1e-300)
    assert binomial_pmf(10, 0.5)[5] == pytest.approx(0.24609375)
    assert retention_probability(15, 0.8, 15) == pytest.approx(0.8**15)
    assert retention_probability(10, 0.5, 0) == 1.0


def test_thinning_small_matches_binomial():
    counts = simulate_thinning(10, 0.5, 3, 4000, 0)
    assert chi_square_pvalue(counts, 10, 0.5) > 0.01


def test_thinning_identity_when_full():
    _, m = two_lines(N=10)
    nb = Neighborhood(0, np.arange(1, 10), m.select_columns(range(1, 10)), np.arange(6), np.zeros(9))
    out = thin_neighborhood(nb, np.arange(6), 1.0, 3, np.random.default_rng(0))
    assert out.submatrix == nb.submatrix
    out = thin_neighborhood(nb, np.arange(6), 0.5, 0, np.random.default_rng(0))
    assert out.submatrix == nb.submatrix


def test_thinning_keeps_off_support_entries(rng):
    dense = rng.standard_normal((8, 50))
    m = ObservedMatrix.from_dense(dense)
    support = np.arange(4)
    nb = Neighborhood(-1, np.arange(50), m, support, np.zeros(50))
    out = thin_neighborhood(nb, support, 0.5, 2, rng)
    off = out.submatrix.mask()[4:]
    assert off.all()
    assert out.submatrix.nnz < m.nnz


def test_thinning_rejects_short_members():
    m = ObservedMatrix(4, 1, [0], [0], [1.0])
    nb = Neighborhood(-1, np.arange(1), m, np.arange(4), np.zeros(1))
    with pytest.raises(ValueError, match="support observations"):
        thin_neighborhood(nb, np.arange(4), 0.5, 2, np.random.default_rng(0))
