import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from logbilinear.errors import (
    DomainError,
    IllConditionedWarning,
    SingularBasisError,
    SingularBlockError,
    SingularMatrixError,
)
from logbilinear.matkit import (
    assemble_blocks,
    d_projection,
    kron,
    left_inverse,
    numerical_rank,
    partitioned_inverse,
    spd_inverse,
    spd_solve,
    unvec,
    vec,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
shapes = st.tuples(st.integers(1, 4), st.integers(1, 4))


@given(arrays(float, shapes, elements=finite), arrays(float, shapes, elements=finite))
def test_kron_matches_numpy(a, b):
    np.testing.assert_allclose(kron(a, b), np.kron(a, b), rtol=0, atol=1e-12)


@given(arrays(float, shapes, elements=finite))
def test_vec_unvec_round_trip(a):
    v = vec(a)
    assert v.shape == (a.size,)
    np.testing.assert_array_equal(unvec(v, *a.shape), a)
    # columns are stacked, first index fastest
    np.testing.assert_array_equal(v[: a.shape[0]], a[:, 0])


def test_kron_block_layout():
    a = np.array([[1.0, 2.0]])
    b = np.array([[1.0], [10.0]])
    np.testing.assert_array_equal(kron(a, b), [[1.0, 2.0], [10.0, 20.0]])


def test_numerical_rank():
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.ones((3, 2))) == 1
    assert numerical_rank(np.zeros((2, 0))) == 0
    assert numerical_rank(np.array([[1.0, 1.0], [1.0, 1.0 + 4e-16]])) == 1


def test_spd_solve_and_inverse():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4))
    s = a @ a.T + 4 * np.eye(4)
    b = rng.normal(size=(4, 2))
    np.testing.assert_allclose(s @ spd_solve(s, b), b, atol=1e-12)
    np.testing.assert_allclose(spd_inverse(s) @ s, np.eye(4), atol=1e-12)


def test_spd_solve_rejects_indefinite():
    with pytest.raises(SingularMatrixError):
        spd_solve(np.diag([1.0, -1.0]), np.ones(2))


def test_spd_warns_when_ill_conditioned():
    with pytest.warns(IllConditionedWarning):
        spd_inverse(np.diag([1.0, 1e-13]))


def test_left_inverse():
    a = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]])
    np.testing.assert_allclose(left_inverse(a) @ a, np.eye(2), atol=1e-14)
    with pytest.raises(SingularBasisError):
        left_inverse(np.ones((3, 2)))


def _rand_projection_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    m = int(rng.integers(1, n))
    x = rng.normal(size=(n, m))
    d = rng.uniform(0.2, 5.0, size=n)
    return x, d


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_identities(seed):
    x, d = _rand_projection_case(seed)
    dm = np.diag(d)
    p = d_projection(x, d).P
    q = d_projection(x, d).complement()
    np.testing.assert_allclose(p @ p, p, atol=1e-9)
    np.testing.assert_allclose(p.T, dm @ p @ np.linalg.inv(dm), atol=1e-9)
    np.testing.assert_allclose(p.T @ dm @ p, dm @ p, atol=1e-9)
    np.testing.assert_allclose(p + q, np.eye(len(d)), atol=1e-12)
    # projections fix their own subspace and annihilate the D-orthogonal complement
    np.testing.assert_allclose(p @ x, x, atol=1e-9)
    np.testing.assert_allclose(x.T @ dm @ q, 0, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nested_projections_commute(seed):
    x, d = _rand_projection_case(seed)
    sub = x[:, :1]
    p_big, p_small = d_projection(x, d).P, d_projection(sub, d).P
    np.testing.assert_allclose(p_small @ p_big, p_small, atol=1e-9)
    np.testing.assert_allclose(p_big @ p_small, p_small, atol=1e-9)


def test_projection_edge_cases():
    d = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(d_projection(np.zeros((3, 0)), d).P, np.zeros((3, 3)))
    with pytest.raises(SingularBasisError) as info:
        d_projection(np.ones((3, 2)), d)
    assert info.value.rank == 1
    with pytest.raises(DomainError):
        d_projection(np.ones((3, 1)), np.array([1.0, 0.0, 1.0]))


def test_projection_ones_weighted_mean():
    d = np.array([1.0, 3.0])
    p = d_projection(np.ones((2, 1)), d).P
    np.testing.assert_allclose(p @ np.array([0.0, 4.0]), [3.0, 3.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partitioned_inverse_reassembles(seed):
    rng = np.random.default_rng(seed)
    a, b = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    m = rng.normal(size=(a + b, a + b))
    s = m @ m.T + (a + b) * np.eye(a + b)
    blocks = partitioned_inverse(s[:a, :a], s[:a, a:], s[a:, :a], s[a:, a:])
    np.testing.assert_allclose(assemble_blocks(*blocks), np.linalg.inv(s), atol=1e-10)


def test_partitioned_inverse_singular_blocks():
    with pytest.raises(SingularBlockError) as info:
        partitioned_inverse(np.zeros((1, 1)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
    assert info.value.block == "L"
    with pytest.raises(SingularBlockError) as info:
        partitioned_inverse(np.eye(1), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
    assert info.value.block == "N"
    with pytest.raises(DomainError):
        partitioned_inverse(np.eye(2), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))


def test_no_warning_for_well_conditioned():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spd_inverse(np.eye(3))
