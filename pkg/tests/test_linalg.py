import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from viscobeam.linalg import (
    BandedLU, DenseLU, NumericalFailure, coordinate_permutation, factorize, lu_solve, null_space,
    singular_values,
)


def test_identity_and_hand_check():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(lu_solve(np.eye(3), b), b)
    np.testing.assert_allclose(lu_solve(np.array([[2.0, 1.0], [1.0, 2.0]]), [3.0, 3.0]), [1.0, 1.0])


def test_random_spd(rng):
    G = rng.standard_normal((50, 50))
    M = G @ G.T + 50 * np.eye(50)
    b = rng.standard_normal(50)
    x = lu_solve(M, b)
    assert np.linalg.norm(M @ x - b) <= 1e-12 * np.linalg.norm(b) * np.linalg.cond(M)


def test_singular_raises():
    with pytest.raises(NumericalFailure):
        DenseLU(np.zeros((3, 3)))


def test_singular_values():
    np.testing.assert_allclose(singular_values(np.diag([1.0, 3.0, 2.0])), [3, 2, 1])
    u, v = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
    s = singular_values(np.outer(u, v))
    assert s[0] == pytest.approx(15.0) and abs(s[1]) < 1e-14


def test_singular_values_gram(rng):
    M = rng.standard_normal((10, 6))
    s = singular_values(M)
    oracle = np.sqrt(np.sort(np.linalg.eigvalsh(M.T @ M))[::-1])
    np.testing.assert_allclose(s, oracle, rtol=1e-10)
    assert (s**2).sum() == pytest.approx(np.linalg.norm(M, "fro") ** 2, rel=1e-10)


def _saddle(rng, n, m):
    A = sp.diags([-1.0, 2.5, -1.0], [-1, 0, 1], shape=(n, n))
    B = sp.random(m, n, density=0.3, random_state=int(rng.integers(1 << 30))) + sp.eye(m, n)
    C = 1e-3 * sp.eye(m)
    return sp.bmat([[A, B.T], [B, -C]], format="csr")


def test_banded_matches_dense(rng):
    n = 40
    A = sp.diags([rng.standard_normal(n - 2), rng.standard_normal(n - 1), 4 + rng.random(n),
                  rng.standard_normal(n - 1)], [-2, -1, 0, 1], format="csr")
    b = rng.standard_normal(n)
    x = BandedLU(A).solve(b)
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), rtol=1e-12, atol=1e-12)


def test_banded_with_permutation():
    # interleaving by coordinate turns a block arrow matrix into a banded one
    n = 30
    x = np.linspace(0, 1, n)
    T = sp.diags([-1.0, 2.2, -1.0], [-1, 0, 1], shape=(n, n))
    M = sp.bmat([[T, sp.eye(n)], [sp.eye(n), -0.5 * sp.eye(n)]], format="csr")
    perm = coordinate_permutation(np.concatenate([x, x]), np.r_[np.zeros(n), np.ones(n)])
    lu = BandedLU(M, perm)
    assert lu.kl <= 3 and lu.ku <= 3
    b = np.arange(2 * n, dtype=float)
    np.testing.assert_allclose(lu.solve(b), np.linalg.solve(M.toarray(), b), rtol=1e-11)
    assert isinstance(factorize(M, perm, dense_limit=10), BandedLU)
    assert isinstance(factorize(M, perm), DenseLU)


def test_null_space():
    B = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    Z = null_space(B)
    assert Z.shape == (3, 1)
    np.testing.assert_allclose(np.abs(Z[:, 0]), [0, 0, 1], atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_saddle_solves(n, m, seed):
    m = min(m, n)
    rng = np.random.default_rng(seed)
    M = _saddle(rng, n, m)
    b = rng.standard_normal(n + m)
    x = lu_solve(M.toarray(), b)
    assert np.linalg.norm(M @ x - b) <= 1e-9 * (1 + np.linalg.norm(b)) * np.linalg.cond(M.toarray())
