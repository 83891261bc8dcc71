import numpy as np
import pytest

from gxestat.numerics import DimensionMismatchError, NonFiniteError, ols, svd


def jacobi_eigenvalues(a, sweeps=100):
    """Independent cyclic-Jacobi eigenvalue oracle for symmetric matrices."""
    a = a.copy()
    n = a.shape[0]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-14:
                    continue
                off = max(off, abs(a[p, q]))
                theta = 0.5 * np.arctan2(2 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
        if off < 1e-14:
            break
    return np.sort(np.diag(a))[::-1]


def test_identity_singular_values():
    r = svd(np.eye(3))
    assert np.allclose(r.sigma, [1.0, 1.0, 1.0])


def test_diagonal_with_negative_entry():
    r = svd(np.diag([3.0, -2.0]))
    assert np.allclose(r.sigma, [3.0, 2.0])


def test_random_reconstruction_and_jacobi_oracle(rng):
    a = rng.normal(size=(7, 4))
    r = svd(a)
    assert np.linalg.norm(r.reconstruct() - a) <= 1e-10 * max(1.0, np.linalg.norm(a))
    assert np.abs(r.u.T @ r.u - np.eye(4)).max() < 1e-10
    assert np.abs(r.v.T @ r.v - np.eye(4)).max() < 1e-10
    eig = jacobi_eigenvalues(a.T @ a)
    assert np.allclose(np.sort(r.sigma**2)[::-1], eig, rtol=1e-9, atol=1e-9)


def test_transpose_swaps_factors(rng):
    a = rng.normal(size=(6, 3))
    r = svd(a)
    rt = svd(a.T)
    assert np.allclose(r.sigma, rt.sigma)
    assert np.allclose(rt.u, r.v)
    assert np.allclose(rt.v, r.u)


def test_scaling_scales_sigma_only(rng):
    a = rng.normal(size=(5, 4))
    r1 = svd(a)
    r2 = svd(2.5 * a)
    assert np.allclose(r2.sigma, 2.5 * r1.sigma)
    assert np.allclose(r2.u, r1.u)
    assert np.allclose(r2.v, r1.v)


def test_sign_convention_deterministic(rng):
    a = rng.normal(size=(6, 4))
    r1, r2 = svd(a), svd(a.copy())
    assert np.array_equal(r1.u, r2.u) and np.array_equal(r1.v, r2.v)
    for j in range(4):
        col = r1.u[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        assert col[nz[0]] >= 0


def test_rank_deficient_matrix(rng):
    u = rng.normal(size=(8, 2))
    v = rng.normal(size=(5, 2))
    a = u @ v.T
    r = svd(a)
    assert np.sum(r.sigma > 1e-10) == 2
    assert np.linalg.norm(r.reconstruct() - a) < 1e-9 * np.linalg.norm(a)


def test_svd_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_ols_identity_design():
    y = np.array([1.0, 2.0, 3.0])
    f = ols(y, np.eye(3))
    assert np.allclose(f.coefficients, y)
    assert f.residual_ss == pytest.approx(0.0, abs=1e-20)


def test_ols_exact_line():
    x1 = np.arange(6.0)
    x = np.column_stack([np.ones(6), x1])
    y = 2.0 * x1 + 3.0
    f = ols(y, x)
    assert np.allclose(f.coefficients, [3.0, 2.0])
    assert f.residual_ss < 1e-18


def test_ols_matches_normal_equations(rng):
    x = np.column_stack([np.ones(30), rng.normal(size=(30, 3))])
    beta = np.array([1.0, -2.0, 0.5, 3.0])
    y = x @ beta + 0.1 * rng.normal(size=30)
    f = ols(y, x)
    oracle = np.linalg.solve(x.T @ x, x.T @ y)
    assert np.abs(f.coefficients - oracle).max() < 1e-9
    # standard errors against the normal-equations covariance
    s2 = f.residual_ss / f.df_residual
    se = np.sqrt(np.diag(np.linalg.inv(x.T @ x)) * s2)
    assert np.allclose(f.coefficient_standard_errors, se)


def test_ols_aliased_column_reported():
    x1 = np.arange(10.0)
    x = np.column_stack([np.ones(10), x1, 2 * x1 + 3.0])
    y = 2 * x1 + 1.0
    f = ols(y, x)
    assert f.design_rank == 2
    assert list(f.aliased) == [False, False, True]
    assert f.coefficients[2] == 0.0
    assert np.isnan(f.coefficient_standard_errors[2])
    # earlier columns take precedence, so the fit is still exact
    assert f.residual_ss < 1e-16


def test_ols_residual_orthogonality(rng):
    x = rng.normal(size=(40, 5))
    y = rng.normal(size=40)
    f = ols(y, x)
    dots = x.T @ f.residuals
    assert np.abs(dots).max() <= 1e-8 * np.linalg.norm(y)


def test_ols_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        ols(np.ones(3), np.ones((4, 2)))
    with pytest.raises(DimensionMismatchError):
        ols(np.ones(2), np.ones((2, 5)))
