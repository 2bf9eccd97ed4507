import warnings

import numpy as np
import pytest

from hrmc.core import ObservedMatrix, Subspace, principal_angles, subspace_contained_in
from hrmc.datagen import gen_union_of_subspaces
from hrmc.errors import NoCandidatesError
from hrmc.lowrank import SolverConfig
from hrmc.pipeline import (
    Candidate,
    CandidateSet,
    ParamWarning,
    complete_neighborhoods,
    derive_params,
    form_neighborhood,
    refine_subspaces,
)
from hrmc.pipeline.neighborhoods import Neighborhood


def e(i, n=3):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def nb_from(x, seed=0):
    m = ObservedMatrix.from_dense(x)
    return Neighborhood(seed, np.arange(x.shape[1]), m, np.arange(x.shape[0]), np.zeros(x.shape[1]))


def test_refine_examples():
    e1, e2 = Subspace.span(e(0)), Subspace.span(e(1))
    plane = Subspace.span(e(0), e(1))
    out = refine_subspaces([plane, e1, e2])
    assert len(out) == 2 and out[0] == e1 and out[1] == e2
    out = refine_subspaces([e1, e1])
    assert out == [e1]


def test_refine_orders_by_rank_then_seed():
    e1, e2, e3 = (Subspace.span(e(i)) for i in range(3))
    cands = [Candidate(Subspace.span(e(0), e(2)), seed=0, rank=2),
             Candidate(e2, seed=5, rank=1), Candidate(e1, seed=9, rank=1)]
    out = refine_subspaces(CandidateSet(cands))
    assert out[:2] == [e2, e1]
    assert len(out) == 3


def test_refine_keeps_true_subspaces(rng):
    truth = gen_union_of_subspaces(30, 10, 5, 3, rng)
    out = refine_subspaces(truth.subspaces)
    assert len(out) == 5


def test_refine_never_accepts_spanned_candidate(rng):
    subs = [Subspace(np.linalg.qr(rng.standard_normal((8, d)))[0]) for d in (1, 2, 2, 3, 1)]
    subs.append(Subspace.span(subs[0].basis[:, 0], subs[1].basis[:, 0]))
    out = refine_subspaces(subs)
    dims = [s.dim for s in out]
    assert dims == sorted(dims)
    for i, s in enumerate(out):
        assert not subspace_contained_in(s, out[:i])


def test_refine_output_is_antichain_for_generic_candidates(rng):
    true = [Subspace(np.linalg.qr(rng.standard_normal((40, 3)))[0]) for _ in range(4)]
    unions = [Subspace.span(*a.basis.T, *b.basis.T) for a, b in zip(true, true[1:])]
    out = refine_subspaces(unions + true + true[:2])
    assert len(out) == 4
    for i, s in enumerate(out):
        assert not subspace_contained_in(s, out[:i] + out[i + 1:])


def test_complete_neighborhoods_single_subspace(rng):
    u = np.linalg.qr(rng.standard_normal((10, 2)))[0]
    x = u @ rng.standard_normal((2, 12))
    cs = complete_neighborhoods([nb_from(x)], 2, SolverConfig(), [rng])
    assert len(cs) == 1
    assert principal_angles(cs.candidates[0].subspace, Subspace(u)).max() < 1e-6


def test_mixed_neighborhood_is_discarded(rng):
    u = np.linalg.qr(rng.standard_normal((12, 2)))[0]
    w = np.linalg.qr(rng.standard_normal((12, 2)))[0]
    pure = u @ rng.standard_normal((2, 10))
    mixed = np.hstack([pure[:, :5], w @ rng.standard_normal((2, 5))])
    mask = rng.random(mixed.shape) < 0.8
    nb_mixed = Neighborhood(1, np.arange(10), ObservedMatrix.from_dense(mixed, mask),
                            np.arange(12), np.zeros(10))
    cs = complete_neighborhoods([nb_from(pure), nb_mixed], 2, SolverConfig(max_restarts=1), [rng, rng])
    assert [c.seed for c in cs.candidates] == [0]
    assert [c.seed for c in cs.rejected] == [1]
    with pytest.raises(NoCandidatesError, match="no candidate subspaces"):
        complete_neighborhoods([nb_mixed], 2, SolverConfig(max_restarts=0), [rng])


def test_wide_ball_mixes_and_fails():
    rng = np.random.default_rng(2)
    # short columns: every pairwise gap is far inside an eps0 = 0.5 ball
    truth = gen_union_of_subspaces(10, 200, 2, 2, rng)
    m = ObservedMatrix.from_dense(0.1 * truth.full_matrix)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParamWarning)
        p = derive_params(10, 200, 2, 2, eps0=0.5, ell0=15, t0=3, eta0=5, neighborhood_size=40)
    nb = form_neighborhood(m, 0, p, rng)
    assert len(set(truth.labels[nb.member_cols])) == 2
    with pytest.raises(NoCandidatesError):
        complete_neighborhoods([nb], 2, SolverConfig(max_restarts=1), [rng])
