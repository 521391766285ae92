import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from pintcontrol.temporal import (
    TemporalSymbol,
    alpha_circulant_dense,
    alpha_circulant_eigs,
    alpha_invertibility_check,
    apply_lower_toeplitz,
    b2inv_symbol,
    b_symbol,
    choose_alpha,
    identity_symbol,
)


def test_b_symbol_n3():
    np.testing.assert_array_equal(b_symbol(3).coeffs, [1, -2, 2])


def test_b_symbol_n1():
    np.testing.assert_array_equal(b_symbol(1).coeffs, [1])


def test_b_symbol_n2_matches_bidiagonal_product():
    expected = np.linalg.inv(oracles.B2(2)) @ oracles.B1(2)
    np.testing.assert_array_equal(expected, [[1, 0], [-2, 1]])
    np.testing.assert_array_equal(b_symbol(2).dense(), expected)


@pytest.mark.parametrize("fn", [b_symbol, b2inv_symbol, identity_symbol])
def test_symbol_rejects_zero(fn):
    with pytest.raises(ValueError):
        fn(0)


def test_symbol_shape_validated():
    with pytest.raises(ValueError):
        TemporalSymbol(3, np.ones(2))


@pytest.mark.parametrize("n", [1, 2, 3, 5, 17, 64])
def test_b2inv_and_commutation(n):
    b1, b2 = oracles.B1(n), oracles.B2(n)
    b2inv = np.linalg.inv(b2)
    np.testing.assert_array_equal(np.rint(b2inv), b2inv_symbol(n).dense())
    np.testing.assert_allclose(b2inv, b2inv_symbol(n).dense(), atol=1e-12)
    left, right = np.rint(b2inv @ b1), np.rint(b1 @ b2inv)
    np.testing.assert_array_equal(left, right)
    np.testing.assert_array_equal(left, b_symbol(n).dense())


@pytest.mark.parametrize("n", [1, 2, 5, 16, 64])
def test_rank_one_identity(n):
    Bm = b_symbol(n).dense()
    d = (-1.0) ** np.arange(1, n + 1)
    np.testing.assert_array_equal(Bm + Bm.T, 2 * np.outer(d, d))
    ev = np.linalg.eigvalsh(Bm + Bm.T)
    np.testing.assert_allclose(ev, np.r_[np.zeros(n - 1), 2 * n], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 8, 64])
def test_btilde_norms(n):
    Bt = oracles.B_tilde(n)
    np.testing.assert_array_equal(Bt, alpha_circulant_dense(b_symbol(n), 1.0) - b_symbol(n).dense())
    prod = Bt @ Bt.T
    assert np.abs(prod).sum(axis=0).max() == 2 * n * (n - 1)
    T = 1.0
    tau = T / n
    assert np.linalg.norm(prod, 2) <= 2 * T**2 / tau**2


def test_btilde_norm1_example_n3():
    prod = oracles.B_tilde(3) @ oracles.B_tilde(3).T
    assert np.abs(prod).sum(axis=0).max() == 12


def test_apply_b2inv_example():
    np.testing.assert_allclose(apply_lower_toeplitz(b2inv_symbol(3), np.ones(3), 1), [1, 0, 1], atol=1e-14)


def test_apply_identity_symbol():
    x = np.random.default_rng(0).standard_normal(12)
    np.testing.assert_allclose(apply_lower_toeplitz(identity_symbol(4), x, 3), x, atol=1e-14)


def test_apply_b_first_column():
    np.testing.assert_allclose(apply_lower_toeplitz(b_symbol(2), [1.0, 0.0], 1), [1, -2], atol=1e-14)


def test_apply_length_mismatch():
    with pytest.raises(ValueError):
        apply_lower_toeplitz(b_symbol(3), np.ones(7), 2)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), J=st.integers(1, 6), seed=st.integers(0, 2**31 - 1),
       transpose=st.booleans(), complex_input=st.booleans())
def test_apply_matches_direct_multiply(n, J, seed, transpose, complex_input):
    rng = np.random.default_rng(seed)
    col = rng.standard_normal(n)
    x = rng.standard_normal(n * J)
    if complex_input:
        x = x + 1j * rng.standard_normal(n * J)
    T = oracles.toeplitz_lower(col)
    if transpose:
        T = T.T
    expected = (np.kron(T, np.eye(J)) @ x)
    got = apply_lower_toeplitz(TemporalSymbol(n, col), x, J, transpose=transpose)
    assert got.dtype.kind == ("c" if complex_input else "f")
    scale = np.abs(col).sum() * np.abs(x).max()
    assert np.abs(got - expected).max() <= 1e-13 * max(scale, 1.0)


def test_apply_keeps_2d_shape():
    X = np.ones((4, 3))
    assert apply_lower_toeplitz(b_symbol(4), X, 3).shape == (4, 3)


def test_alpha_eigs_n2():
    f = alpha_circulant_eigs(b_symbol(2), 1.0)
    np.testing.assert_allclose(f.eigs, [-1, 3], atol=1e-14)


@pytest.mark.parametrize("alpha", [1e-6, 0.3, 1.0])
def test_alpha_eigs_n1(alpha):
    np.testing.assert_allclose(alpha_circulant_eigs(b_symbol(1), alpha).eigs, [1])


def test_alpha_eigs_n4_dense_similarity():
    n, alpha = 4, 0.5
    f = alpha_circulant_eigs(b_symbol(n), alpha)
    q = b_symbol(n).coeffs
    Ba = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            Ba[i, j] = q[i - j] if i >= j else alpha * q[n - (j - i)]
    D = np.diag(alpha ** (np.arange(n) / n))
    ev = np.linalg.eigvals(D @ Ba @ np.linalg.inv(D))
    # match as multisets
    for lam in f.eigs:
        assert np.min(np.abs(ev - lam)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 50), alpha=st.floats(1e-8, 1.0))
def test_alpha_factor_invariants(n, alpha):
    f = alpha_circulant_eigs(b_symbol(n), alpha)
    k = np.arange(n)
    direct = (b_symbol(n).coeffs * alpha ** (k / n)) @ np.exp(-2j * np.pi * np.outer(k, k) / n)
    np.testing.assert_allclose(f.eigs, direct, atol=1e-10 * n)
    np.testing.assert_allclose(f.eigs[1:], np.conj(f.eigs[1:][::-1]), atol=1e-12 * n)
    assert np.all(f.d_scale > 0) and np.all(np.diff(f.d_scale) <= 0)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_alpha_eigs_rejects(alpha):
    with pytest.raises(ValueError):
        alpha_circulant_eigs(b_symbol(3), alpha)


@pytest.mark.parametrize("n", [2, 3, 8, 33])
@pytest.mark.parametrize("alpha", [1.0, 0.5, 0.01])
def test_symmetric_part_spectrum(n, alpha):
    Ba = alpha_circulant_dense(b_symbol(n), alpha)
    s = (-1) ** n
    expected = np.sort(np.r_[n * (1 + alpha * s) - alpha * s, np.full(n - 1, -alpha * s)])
    np.testing.assert_allclose(np.linalg.eigvalsh((Ba + Ba.T) / 2), expected, atol=1e-12 * n)


def test_choose_alpha_first_term_binds():
    tau, gamma, T = 1 / 3, 1.0, 1e-6
    assert choose_alpha(tau, gamma, T) == pytest.approx(0.5 * tau / (24 * math.sqrt(gamma)), rel=1e-15)


def test_choose_alpha_cap_binds():
    assert choose_alpha(1.0, 1e-12, 1.0) == pytest.approx(1 / 6, rel=1e-15)


def test_choose_alpha_third_term_binds():
    tau = 1 / 800
    expected = 0.5 * tau**2 / (8 * math.sqrt(30))
    assert choose_alpha(tau, 10.0, 1.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(1.78e-8, rel=0.01)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, -1)])
def test_choose_alpha_rejects(args):
    with pytest.raises(ValueError):
        choose_alpha(*args)


@settings(max_examples=50, deadline=None)
@given(N=st.integers(1, 2000), gamma=st.floats(1e-10, 1e3), T=st.floats(0.1, 10))
def test_chosen_alpha_is_admissible(N, gamma, T):
    tau = T / N
    alpha = choose_alpha(tau, gamma, T)
    assert 0 < alpha <= 1 / 6
    assert alpha_invertibility_check(alpha, tau, gamma)


def test_invertibility_boundary_excluded():
    tau, gamma = 0.1, 0.04
    assert not alpha_invertibility_check(tau / (2 * math.sqrt(gamma)), tau, gamma)
    assert not alpha_invertibility_check(1.5, 10.0, 1e-6)
    assert alpha_invertibility_check(0.2, tau, gamma)
