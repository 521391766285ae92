import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from pintcontrol.errors import NumericBreakdown
from pintcontrol.spatial import (
    SpatialGrid,
    apply_spatial,
    assemble_spatial,
    shifted_solve,
    vcycle,
)


def bumpy(x1, x2):
    return 1.0 + 0.5 * np.sin(np.pi * x1) * x2 + x1**2


def rng_vec(n, seed=0, complex_=False):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    return v + 1j * rng.standard_normal(n) if complex_ else v


def test_grid_layout_x1_fastest():
    g = SpatialGrid(3)
    x1, x2 = g.points()
    assert g.h == 0.25 and g.J == 9
    # linear index (j-1) m + (i-1) holds (i h, j h)
    np.testing.assert_allclose(x1[:3], [0.25, 0.5, 0.75])
    np.testing.assert_allclose(x2[:3], [0.25, 0.25, 0.25])
    np.testing.assert_allclose(x2[3], 0.5)


@pytest.mark.parametrize("m", [0, -1, 2.5])
def test_grid_rejects(m):
    with pytest.raises(ValueError):
        SpatialGrid(m)


@pytest.mark.parametrize("m,nest", [(1, True), (3, True), (7, True), (31, True), (6, False), (5, False)])
def test_nestable(m, nest):
    assert SpatialGrid(m).nestable is nest


def test_m1_operator_is_16():
    op = assemble_spatial(SpatialGrid(1))
    np.testing.assert_array_equal(op.to_dense(), [[16.0]])
    np.testing.assert_allclose(op.eigs, [16.0])


@pytest.mark.parametrize("m", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("mode", ["sine", "stencil"])
def test_constant_matches_kron_oracle(m, mode):
    op = assemble_spatial(SpatialGrid(m), 2.5, mode)
    np.testing.assert_allclose(op.to_dense(), oracles.laplacian_const(m, 2.5), rtol=1e-14)


@pytest.mark.parametrize("m", [1, 3, 4, 7])
def test_variable_matches_flux_oracle(m):
    op = assemble_spatial(SpatialGrid(m), bumpy)
    assert op.mode == "stencil"
    np.testing.assert_allclose(op.to_dense(), oracles.laplacian_flux(m, bumpy), rtol=1e-13)


@pytest.mark.parametrize("m", [1, 3, 7, 15])
@pytest.mark.parametrize("a", [1.0, bumpy])
def test_symmetric_positive_definite(m, a):
    L = assemble_spatial(SpatialGrid(m), a).to_dense()
    np.testing.assert_array_equal(L, L.T)
    ev = np.linalg.eigvalsh(L)
    assert ev[0] > 1e-12 * ev[-1]


def test_sine_eigenvalues_m3():
    m = 3
    op = assemble_spatial(SpatialGrid(m))
    h = 1 / (m + 1)
    p = np.arange(1, m + 1)
    s = np.sin(p * np.pi * h / 2) ** 2
    closed = np.array([4 / h**2 * (s[pp - 1] + s[qq - 1]) for qq in p for pp in p])
    np.testing.assert_allclose(op.eigs, closed, rtol=1e-14)
    np.testing.assert_allclose(np.sort(op.eigs), np.linalg.eigvalsh(op.to_dense()), rtol=1e-12)


def test_row_sums_of_ones():
    m = 7
    op = assemble_spatial(SpatialGrid(m))
    out = apply_spatial(op, np.ones(op.J)).reshape(m, m)
    assert np.all(out[1:-1, 1:-1] == 0)
    band = np.ones((m, m), bool)
    band[1:-1, 1:-1] = False
    assert np.all(out[band] > 0)


def test_apply_zero_and_length_check():
    op = assemble_spatial(SpatialGrid(3))
    np.testing.assert_array_equal(apply_spatial(op, np.zeros(9)), 0)
    with pytest.raises(ValueError):
        apply_spatial(op, np.zeros(8))


def test_first_sine_mode_is_eigenvector():
    m = 3
    op = assemble_spatial(SpatialGrid(m))
    x1, x2 = op.grid.points()
    u = np.sin(np.pi * x1) * np.sin(np.pi * x2)
    np.testing.assert_allclose(apply_spatial(op, u), op.eigs[0] * u, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(1, 12), seed=st.integers(0, 2**31 - 1))
def test_apply_psd_and_batched(m, seed):
    op = assemble_spatial(SpatialGrid(m), bumpy)
    U = np.random.default_rng(seed).standard_normal((3, op.J))
    LU = apply_spatial(op, U)
    L = oracles.laplacian_flux(m, bumpy)
    np.testing.assert_allclose(LU, U @ L.T, atol=1e-9 * np.abs(L).max())
    assert np.all(np.einsum("ij,ij->i", U, LU) >= 0)


def test_sine_transform_diagonalizes():
    m = 6
    op = assemble_spatial(SpatialGrid(m))
    S = op.sine_matrix
    np.testing.assert_allclose(S @ S, np.eye(m), atol=1e-14)
    u = rng_vec(op.J, 3)
    U = u.reshape(m, m)
    via_transform = S @ (op.eigs2d * (S @ U @ S)) @ S
    np.testing.assert_allclose(via_transform.ravel(), apply_spatial(op, u), atol=1e-12 * np.abs(op.eigs).max())


def test_rejects_nonpositive_coefficient():
    with pytest.raises(ValueError):
        assemble_spatial(SpatialGrid(3), 0.0)
    with pytest.raises(ValueError):
        assemble_spatial(SpatialGrid(3), lambda x1, x2: x1 - 0.5)


def test_sine_requires_constant():
    with pytest.raises(ValueError):
        assemble_spatial(SpatialGrid(3), bumpy, "sine")


def test_shifted_scale_zero():
    op = assemble_spatial(SpatialGrid(3))
    r = rng_vec(9, 1, True)
    np.testing.assert_allclose(shifted_solve(op, 2 - 1j, 0.0, r), r / (2 - 1j))


def test_shifted_sine_dense_complex_oracle():
    op = assemble_spatial(SpatialGrid(3))
    r = rng_vec(9, 2, True)
    A = (1 + 1j) * np.eye(9) + oracles.laplacian_const(3)
    np.testing.assert_allclose(shifted_solve(op, 1 + 1j, 1.0, r), np.linalg.solve(A, r), atol=1e-12)


@pytest.mark.parametrize("m", [3, 31, 80])
def test_shifted_sine_residual(m):
    """Covers both the matrix and the FFT transform paths."""
    op = assemble_spatial(SpatialGrid(m))
    L = op.to_sparse()
    sig = np.array([0.3 + 2j, 5.0, 1e-3 - 1j])
    R = np.random.default_rng(m).standard_normal((3, op.J)) + 0j
    X = shifted_solve(op, sig, 0.7, R)
    for k in range(3):
        res = sig[k] * X[k] + 0.7 * (L @ X[k]) - R[k]
        assert np.linalg.norm(res) <= 1e-12 * np.linalg.norm(R[k])


def test_shifted_real_stays_real():
    op = assemble_spatial(SpatialGrid(5))
    r = rng_vec(25, 4)
    x = shifted_solve(op, 1.5, 2.0, r)
    assert np.isrealobj(x) or np.abs(np.imag(x)).max() <= 1e-14 * np.linalg.norm(r)


def test_shifted_singular_detected():
    op = assemble_spatial(SpatialGrid(1))
    with pytest.raises(NumericBreakdown):
        shifted_solve(op, -op.eigs[0], 1.0, np.ones(1))


def test_vcycle_fixed_point():
    op = assemble_spatial(SpatialGrid(15), bumpy)
    x = rng_vec(op.J, 5, True)
    sig, scale = 2 + 1j, 0.1
    r = sig * x + scale * apply_spatial(op, x)
    np.testing.assert_allclose(vcycle(op, sig, scale, r, x), x, atol=1e-13 * np.abs(x).max())


def test_vcycle_contraction_m7():
    m = 7
    op = assemble_spatial(SpatialGrid(m), 1.0, "stencil")
    A = np.eye(op.J) + oracles.laplacian_const(m)
    rng = np.random.default_rng(6)
    for _ in range(5):
        x_exact = rng.standard_normal(op.J)
        x0 = rng.standard_normal(op.J)
        x1 = vcycle(op, 1.0, 1.0, A @ x_exact, x0)
        assert np.linalg.norm(x1 - x_exact) <= 0.2 * np.linalg.norm(x0 - x_exact)


def test_vcycle_complex_shift_converges():
    m = 31
    op = assemble_spatial(SpatialGrid(m), bumpy)
    r = rng_vec(op.J, 7, True)
    sig = np.array([0.05 + 3j, 1.0 - 0.5j])
    X = shifted_solve(op, sig, 1e-3, np.stack([r, r]), rtol=1e-10)
    for k in range(2):
        res = sig[k] * X[k] + 1e-3 * apply_spatial(op, X[k]) - r
        assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(r)


def test_vcycle_rejects_non_nestable():
    op = assemble_spatial(SpatialGrid(6), 1.0, "stencil")
    with pytest.raises(ValueError):
        vcycle(op, 1.0, 1.0, np.ones(36))


def test_one_cycle_is_default_in_stencil_mode():
    op = assemble_spatial(SpatialGrid(15), bumpy)
    r = rng_vec(op.J, 8)
    np.testing.assert_array_equal(shifted_solve(op, 1.0, 0.5, r), vcycle(op, 1.0, 0.5, r))
