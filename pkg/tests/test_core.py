import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hrmc.core import (
    CONDITION_LIMIT,
    ObservedMatrix,
    ObservedVector,
    Subspace,
    coherence_subspace,
    coherence_vector,
    complete_column,
    orthonormalize,
    partial_distance,
    partial_distances_to,
    principal_angles,
    restricted_projection_residual,
    subspace_contained_in,
)
from hrmc.errors import DegenerateRestrictionError, EmptyBasisError, UnderdeterminedError


def e(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# --------------------------------------------------------------- containers


def test_observed_vector_validation():
    with pytest.raises(ValueError):
        ObservedVector(4, [2, 1], [1.0, 2.0])
    with pytest.raises(ValueError):
        ObservedVector(4, [0, 4], [1.0, 2.0])
    with pytest.raises(ValueError):
        ObservedVector(4, [0, 1], [1.0])
    x = ObservedVector.from_dense([1.0, 2.0, 3.0], [True, False, True])
    assert x.indices.tolist() == [0, 2] and x.values.tolist() == [1.0, 3.0]
    assert x.sq_norm() == 10.0


def test_observed_matrix_rejects_bad_entries():
    with pytest.raises(ValueError, match="duplicate"):
        ObservedMatrix(3, 3, [0, 0], [1, 1], [1.0, 2.0])
    with pytest.raises(ValueError, match="row index"):
        ObservedMatrix(3, 3, [3], [0], [1.0])
    with pytest.raises(ValueError, match="column index"):
        ObservedMatrix(3, 3, [0], [-1], [1.0])


def test_observed_matrix_column_and_counts():
    m = ObservedMatrix(3, 2, [2, 0, 1], [0, 0, 1], [5.0, 4.0, 7.0])
    c0 = m.column(0)
    assert c0.indices.tolist() == [0, 2] and c0.values.tolist() == [4.0, 5.0]
    assert m.column(1).indices.tolist() == [1]
    assert m.column_counts().tolist() == [2, 1]
    assert m.row_counts().tolist() == [1, 1, 1]
    dense, mask = m.to_dense(np.nan)
    assert mask.sum() == 3 and np.isnan(dense[1, 0])
    assert m.entries() == {(0, 0): 4.0, (2, 0): 5.0, (1, 1): 7.0}


@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_observed_matrix_column_extraction_matches_entries(n, m, data):
    mask = data.draw(arrays(bool, (n, m)))
    vals = data.draw(arrays(float, (n, m), elements=finite))
    om = ObservedMatrix.from_dense(vals, mask)
    ent = om.entries()
    assert len(ent) == mask.sum()
    for j in range(m):
        col = om.column(j)
        assert col.indices.tolist() == np.flatnonzero(mask[:, j]).tolist()
        assert [ent[(i, j)] for i in col.indices] == col.values.tolist()


def test_select_columns_keeps_order():
    m = ObservedMatrix.from_dense(np.arange(12.0).reshape(3, 4))
    s = m.select_columns([3, 1])
    assert s.shape == (3, 2)
    assert s.column(0).values.tolist() == [3.0, 7.0, 11.0]


# ---------------------------------------------------------------- coherence


def test_coherence_subspace_examples():
    assert coherence_subspace(Subspace.span(e(0, 4))) == pytest.approx(4.0)
    assert coherence_subspace(Subspace.span(np.ones(4))) == pytest.approx(1.0)
    s = Subspace.span(np.array([1, 1, 0, 0.0]), np.array([0, 0, 1, 1.0]))
    assert coherence_subspace(s) == pytest.approx(1.0)


def test_coherence_subspace_empty():
    with pytest.raises(EmptyBasisError, match="empty basis"):
        coherence_subspace(Subspace(np.zeros((4, 0))))


def test_coherence_vector_examples():
    assert coherence_vector([1, 0, 0, 0]) == 4.0
    assert coherence_vector([1, 1, 1, 1]) == 1.0
    assert coherence_vector([3, 4, 0, 0]) == pytest.approx(2.56)
    with pytest.raises(ValueError, match="zero vector"):
        coherence_vector([0, 0, 0])


@given(arrays(float, st.integers(2, 12), elements=finite))
def test_coherence_vector_matches_span(x):
    assume(np.linalg.norm(x) > 1e-6)
    mu = coherence_vector(x)
    assert 1 - 1e-9 <= mu <= x.size + 1e-9
    assert mu == pytest.approx(coherence_subspace(Subspace.span(x)), rel=1e-9)


@given(st.integers(2, 15), st.data())
def test_coherence_subspace_bounds(n, data):
    d = data.draw(st.integers(1, n))
    seed = data.draw(st.integers(0, 2**32 - 1))
    u = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, d)))[0]
    mu = coherence_subspace(Subspace(u))
    assert 1 - 1e-9 <= mu <= n / d + 1e-9


# --------------------------------------------------------- partial distance


def test_partial_distance_examples():
    full = ObservedVector.from_dense([3, 4, 0, 0])
    zero = ObservedVector.from_dense(np.zeros(4))
    pd = partial_distance(full, zero)
    assert pd.overlap_count == 4 and pd.estimate == 25.0
    ones = ObservedVector.from_dense(np.ones(4))
    half = ObservedVector(4, [0, 1], [0.0, 0.0])
    pd = partial_distance(ones, half, min_overlap=2)
    assert pd.overlap_count == 2 and pd.estimate == 4.0
    a = ObservedVector(4, [0, 1], [1.0, 1.0])
    b = ObservedVector(4, [2, 3], [1.0, 1.0])
    pd = partial_distance(a, b, min_overlap=1)
    assert pd.overlap_count == 0 and not pd.sufficient


def test_partial_distance_min_overlap():
    a = ObservedVector(4, [0, 1, 2], [1.0, 2.0, 3.0])
    b = ObservedVector(4, [1, 2, 3], [0.0, 0.0, 0.0])
    assert not partial_distance(a, b, min_overlap=3).sufficient
    assert partial_distance(a, b, min_overlap=2).estimate == pytest.approx(4 / 2 * 13)


@given(st.integers(1, 20), st.data())
def test_partial_distance_full_overlap_is_exact(n, data):
    x = data.draw(arrays(float, n, elements=finite))
    y = data.draw(arrays(float, n, elements=finite))
    pd = partial_distance(ObservedVector.from_dense(x), ObservedVector.from_dense(y))
    exact = float(np.sum((x - y) ** 2))
    assert pd.estimate == pytest.approx(exact, rel=1e-12, abs=1e-12)
    assert pd.estimate >= 0


def test_partial_distances_to_matches_scalar(rng):
    dense = rng.standard_normal((10, 8))
    mask = rng.random((10, 8)) < 0.6
    m = ObservedMatrix.from_dense(dense, mask)
    q, est = partial_distances_to(m, 0, np.arange(8), min_overlap=2)
    for j in range(8):
        pd = partial_distance(m.column(0), m.column(j), min_overlap=2)
        assert q[j] == pd.overlap_count
        if pd.sufficient:
            assert est[j] == pytest.approx(pd.estimate, rel=1e-12, abs=1e-15)
        else:
            assert np.isnan(est[j])


# ----------------------------------------------------- restricted projection


def test_residual_examples():
    x = ObservedVector(3, [0, 1], [1.0, 0.0])
    assert restricted_projection_residual(x, Subspace.span(e(0, 3))) == 0.0
    assert restricted_projection_residual(x, Subspace.span(e(1, 3))) == pytest.approx(1.0)
    x = ObservedVector(3, [0, 2], [1.0, 0.0])
    assert restricted_projection_residual(x, Subspace.span(e(0, 3))) == 0.0


def test_residual_degenerate_and_underdetermined():
    # span(e2) restricted to rows {0, 1} is the zero vector
    x = ObservedVector(3, [0, 1], [1.0, 2.0])
    with pytest.raises(DegenerateRestrictionError):
        restricted_projection_residual(x, Subspace.span(e(2, 3)))
    s = Subspace.span(e(0, 3), e(1, 3))
    with pytest.raises(UnderdeterminedError):
        complete_column(ObservedVector(3, [0], [1.0]), s)
    assert CONDITION_LIMIT == 1e12


def test_complete_column_examples():
    x = ObservedVector(3, [0], [5.0])
    np.testing.assert_allclose(complete_column(x, Subspace.span(e(0, 3))), [5, 0, 0], atol=1e-15)
    x = ObservedVector(3, [0, 1], [2.0, 2.0])
    np.testing.assert_allclose(complete_column(x, Subspace.span(np.ones(3))), [2, 2, 2], atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(3, 30), st.integers(1, 4))
def test_in_subspace_residual_zero_and_completion_exact(seed, n, d):
    assume(d < n)
    rng = np.random.default_rng(seed)
    u = np.linalg.qr(rng.standard_normal((n, d)))[0]
    s = Subspace(u)
    x = u @ rng.standard_normal(d)
    full = ObservedVector.from_dense(x)
    np.testing.assert_allclose(complete_column(full, s), x, atol=1e-10)
    q = rng.integers(d, n + 1)
    idx = np.sort(rng.choice(n, q, replace=False))
    obs = ObservedVector(n, idx, x[idx])
    try:
        res = restricted_projection_residual(obs, s)
    except DegenerateRestrictionError:
        return
    assert 0.0 <= res <= 1e-16 * max(1.0, obs.sq_norm())
    np.testing.assert_allclose(complete_column(obs, s)[idx], x[idx], atol=1e-8)


def test_out_of_subspace_residual_positive(rng):
    n, d = 60, 3
    hits = 0
    for _ in range(200):
        s = Subspace(np.linalg.qr(rng.standard_normal((n, d)))[0])
        x = rng.standard_normal(n)
        idx = np.sort(rng.choice(n, 3 * d * math.ceil(math.log(n)), replace=False))
        hits += restricted_projection_residual(ObservedVector(n, idx, x[idx]), s) > 1e-8
    assert hits == 200


# -------------------------------------------------------------- containment


def test_containment_examples():
    e1, e2, e3 = (Subspace.span(e(i, 3)) for i in range(3))
    plane = Subspace.span(e(0, 3), e(1, 3))
    assert subspace_contained_in(e1, [plane])
    assert subspace_contained_in(Subspace.span(e(0, 3) + e(1, 3)), [e1, e2])
    assert not subspace_contained_in(e3, [e1, e2])
    assert not subspace_contained_in(e1, [])
    assert subspace_contained_in(Subspace(np.zeros((3, 0))), [])


@given(st.integers(0, 2**32 - 1), st.integers(2, 10), st.data())
def test_containment_reflexive_and_monotone(seed, n, data):
    rng = np.random.default_rng(seed)
    d = data.draw(st.integers(1, n - 1))
    s = Subspace(np.linalg.qr(rng.standard_normal((n, d)))[0])
    assert subspace_contained_in(s, [s])
    others = [Subspace(np.linalg.qr(rng.standard_normal((n, data.draw(st.integers(1, n)))))[0])
              for _ in range(data.draw(st.integers(0, 3)))]
    before = subspace_contained_in(s, others)
    extra = Subspace(np.linalg.qr(rng.standard_normal((n, 1)))[0])
    if before:
        assert subspace_contained_in(s, others + [extra])
    assert subspace_contained_in(s, others + [s])


def test_orthonormalize_and_subspace_checks(rng):
    a = rng.standard_normal((6, 2))
    q = orthonormalize(np.hstack([a, a[:, :1] * 2]))
    assert q.shape == (6, 2)
    np.testing.assert_allclose(q.T @ q, np.eye(2), atol=1e-12)
    with pytest.raises(ValueError):
        Subspace(np.ones((3, 2)))


def test_principal_angles():
    a = Subspace.span(e(0, 3))
    b = Subspace.span(e(0, 3) + e(1, 3))
    assert principal_angles(a, b)[0] == pytest.approx(math.pi / 4)
