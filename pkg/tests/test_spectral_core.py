import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapgraph.errors import ConvergenceError, ValidationError
from gapgraph.spectral_core import (
    EigenPair,
    as_symmetric,
    canonical_sign,
    deflate,
    inner_product,
    is_psd,
    random_psd,
    top_eigenpair,
)


def oracle_pairs(A):
    w, V = np.linalg.eigh(A)
    return w[::-1], V[:, ::-1]


# inner product

def test_inner_product_identity():
    assert inner_product(np.eye(3), np.eye(3)) == 3.0


def test_inner_product_small():
    A = np.array([[1.0, 2.0], [2.0, 0.0]])
    B = np.array([[0.0, 1.0], [1.0, 3.0]])
    assert inner_product(A, B) == 4.0


def test_inner_product_matches_trace():
    rng = np.random.default_rng(1)
    A = random_psd(10, rng) - 3 * np.eye(10)
    B = random_psd(10, rng)
    ref = np.trace(B.T @ A)
    assert abs(inner_product(A, B) - ref) <= 1e-12 * abs(ref)
    assert inner_product(A, B) == pytest.approx(inner_product(B, A), rel=1e-14)


def test_inner_product_self_is_frobenius():
    A = random_psd(6, np.random.default_rng(2))
    assert inner_product(A, A) == pytest.approx(np.linalg.norm(A) ** 2, rel=1e-13)


def test_inner_product_dimension_mismatch():
    with pytest.raises(ValidationError):
        inner_product(np.eye(2), np.eye(3))


def test_as_symmetric_rejects():
    with pytest.raises(ValidationError):
        as_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        as_symmetric(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        as_symmetric(np.ones((2, 3)))


# eigen pairs

def test_eigenpair_requires_unit_vector():
    with pytest.raises(ValidationError):
        EigenPair(1.0, np.array([1.0, 1.0]))
    p = EigenPair(2.0, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        p.vector[0] = 1.0


def test_top_eigenpair_diagonal():
    p = top_eigenpair(np.diag([1.0, 2.0, 3.0]))
    assert p.value == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(p.vector, [0, 0, 1], atol=1e-9)


def test_top_eigenpair_rank_one():
    u = np.random.default_rng(3).standard_normal(7)
    u /= np.linalg.norm(u)
    p = top_eigenpair(np.outer(u, u))
    assert p.value == pytest.approx(1.0, abs=1e-10)
    assert abs(p.vector @ u) == pytest.approx(1.0, abs=1e-10)


def test_top_eigenpair_orthogonal_to_ones():
    # dominant vector orthogonal to the all-ones start
    A = np.array([[1.0, -1.0], [-1.0, 1.0]])
    p = top_eigenpair(A)
    assert p.value == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(p.vector, np.array([1, -1]) / np.sqrt(2), atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_top_eigenpair_matches_dense(seed):
    A = random_psd(12, np.random.default_rng(seed))
    w, V = oracle_pairs(A)
    p = top_eigenpair(A)
    assert abs(p.value - w[0]) <= 1e-8
    assert abs(p.vector @ V[:, 0]) >= 1 - 1e-8
    assert np.linalg.norm(A @ p.vector - p.value * p.vector) <= 1e-10 * max(1, abs(p.value))


def test_top_eigenpair_sign_canonical():
    A = random_psd(8, np.random.default_rng(4))
    v = top_eigenpair(A).vector
    first = v[np.abs(v) > 1e-8 * np.max(np.abs(v))][0]
    assert first > 0


def test_top_eigenpair_indefinite():
    A = np.diag([-5.0, 1.0, 0.5])
    assert top_eigenpair(A).value == pytest.approx(1.0, abs=1e-12)


def test_top_eigenpair_nonconvergence_carries_residual():
    A = random_psd(30, np.random.default_rng(5))
    with pytest.raises(ConvergenceError) as err:
        top_eigenpair(A, tol=1e-15, max_iter=1)
    assert err.value.residual is not None


def test_top_eigenpair_beats_random_rayleigh():
    rng = np.random.default_rng(6)
    A = random_psd(9, rng)
    p = top_eigenpair(A)
    vs = rng.standard_normal((1000, 9))
    vs /= np.linalg.norm(vs, axis=1, keepdims=True)
    rq = np.einsum("ij,jk,ik->i", vs, A, vs)
    assert np.all(rq <= p.value + 1e-10)


# deflation

def test_deflate_empty():
    A = random_psd(4, np.random.default_rng(7))
    np.testing.assert_array_equal(deflate(A, []), A)


def test_deflate_exact_cancellation():
    u = np.ones(4) / 2
    out = deflate(2 * np.outer(u, u), [EigenPair(2.0, u)])
    np.testing.assert_allclose(out, 0, atol=1e-15)


def test_deflate_rejects_non_orthonormal():
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    with pytest.raises(ValidationError):
        deflate(np.eye(3), [EigenPair(1.0, a), EigenPair(1.0, b)])


@pytest.mark.parametrize("seed", range(50))
def test_repeated_deflation_walks_spectrum(seed):
    A = random_psd(10, np.random.default_rng(100 + seed))
    w, V = oracle_pairs(A)
    pairs = []
    for k in range(4):
        p = top_eigenpair(deflate(A, pairs))
        assert abs(p.value - w[k]) <= 1e-8
        assert abs(p.vector @ V[:, k]) >= 1 - 1e-6
        pairs.append(p)


# psd

def test_is_psd_examples():
    assert is_psd(np.eye(5), 1e-9)
    assert not is_psd(np.diag([1.0, -1.0]), 1e-9)
    X = np.random.default_rng(8).standard_normal((4, 7))
    assert is_psd(X.T @ X, 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**31))
def test_canonical_sign_idempotent(n, seed):
    v = np.random.default_rng(seed).standard_normal(n)
    c = canonical_sign(v)
    np.testing.assert_array_equal(canonical_sign(c), c)
    np.testing.assert_array_equal(canonical_sign(-v), c)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_top_eigenpair_property(n, seed):
    A = random_psd(n, np.random.default_rng(seed))
    p = top_eigenpair(A)
    assert p.value == pytest.approx(np.linalg.eigvalsh(A)[-1], abs=1e-8 * max(1, p.value))
