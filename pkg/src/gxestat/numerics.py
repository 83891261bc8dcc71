"""Dense linear-algebra kernels: thin SVD and pivoted least squares.

Everything here operates on small matrices (tens of rows/columns), so the
algorithms are chosen for robustness and determinism rather than speed:
one-sided Jacobi for the SVD, Householder QR with column pivoting for
least squares.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NonFiniteError", "DimensionMismatchError", "SvdResult", "OlsFit", "svd", "ols"]


class NonFiniteError(ValueError):
    """Input contains NaN or infinity."""


class DimensionMismatchError(ValueError):
    """Operand shapes are incompatible."""


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD a = u @ diag(sigma) @ v.T with k = min(m, n) columns."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    residual_ss: float
    df_residual: int
    coefficient_standard_errors: np.ndarray
    design_rank: int
    aliased: np.ndarray = field(default=None)  # boolean mask of dropped columns

    @property
    def sigma2(self) -> float:
        """Residual variance (residual_ss / df_residual), inf when df is 0."""
        if self.df_residual <= 0:
            return float("inf")
        return self.residual_ss / self.df_residual


def _check_finite(a, name="input"):
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains non-finite values")


def svd(a: np.ndarray) -> SvdResult:
    """Thin singular value decomposition by one-sided Jacobi.

    Returns singular values sorted nonincreasing with a deterministic sign
    convention: the first entry of each u column with magnitude above
    1e-12 * ||column|| is nonnegative.  Matrices wider than tall are
    decomposed through their transpose.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatchError("svd expects a 2-D array")
    _check_finite(a, "matrix")
    m, n = a.shape
    if m < n:
        flipped = svd(a.T)
        return SvdResult(u=flipped.v, sigma=flipped.sigma, v=flipped.u)

    # One-sided Jacobi: rotate column pairs of `work` until all pairs are
    # orthogonal; then column norms are the singular values and the applied
    # rotations accumulate V.
    work = a.copy()
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return SvdResult(u=np.eye(m, n), sigma=np.zeros(n), v=np.eye(n))
    tol = 1e-15 * scale * scale
    for _ in range(60):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = work[:, p] @ work[:, p]
                beta = work[:, q] @ work[:, q]
                gamma = work[:, p] @ work[:, q]
                off = max(off, abs(gamma))
                if abs(gamma) <= 1e-30 or gamma * gamma <= 1e-30 * alpha * beta:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                # equal column norms need the full 45-degree rotation
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                gp = work[:, p].copy()
                work[:, p] = c * gp - s * work[:, q]
                work[:, q] = s * gp + c * work[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if off <= tol:
            break

    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    work = work[:, order]
    v = v[:, order]

    u = np.zeros((m, n))
    # Rank-deficient columns get orthonormal completion via projection of
    # coordinate vectors, keeping the output deterministic.
    cut = sigma[0] * 1e-14 if sigma[0] > 0 else 0.0
    for j in range(n):
        if sigma[j] > cut:
            u[:, j] = work[:, j] / sigma[j]
        else:
            sigma[j] = 0.0
            cand = np.zeros(m)
            for k in range(m):
                cand[:] = 0.0
                cand[k] = 1.0
                cand -= u[:, :j] @ (u[:, :j].T @ cand)
                norm = np.linalg.norm(cand)
                if norm > 1e-8:
                    u[:, j] = cand / norm
                    break

    # Sign convention: first significantly nonzero entry of each u column
    # is made nonnegative so output is unique.
    for j in range(n):
        col = u[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * max(1.0, np.linalg.norm(col)))[0]
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return SvdResult(u=u, sigma=sigma, v=v)


def _householder_qr_pivot(x):
    """Householder QR with column pivoting; returns q, r, pivot, rank."""
    x = np.array(x, dtype=float)
    m, n = x.shape
    q = np.eye(m)
    piv = np.arange(n)
    norms2 = (x * x).sum(axis=0)
    tol = max(m, n) * np.finfo(float).eps * (np.sqrt(norms2.max()) if n else 0.0)
    rank = 0
    for k in range(min(m, n)):
        rem = k + np.argmax([(x[k:, j] ** 2).sum() for j in range(k, n)])
        if rem != k:
            x[:, [k, rem]] = x[:, [rem, k]]
            piv[[k, rem]] = piv[[rem, k]]
        col = x[k:, k]
        norm = np.linalg.norm(col)
        if norm <= tol:
            break
        rank += 1
        vec = col.copy()
        vec[0] += np.sign(col[0]) * norm if col[0] != 0 else norm
        vec /= np.linalg.norm(vec)
        x[k:, :] -= 2.0 * np.outer(vec, vec @ x[k:, :])
        q[:, k:] -= 2.0 * np.outer(q[:, k:] @ vec, vec)
    return q, x, piv, rank


def ols(y: np.ndarray, x: np.ndarray) -> OlsFit:
    """Least squares fit of y on the columns of x.

    Rank-deficient designs are handled by column-pivoted QR: aliased
    columns get coefficient 0, NaN standard error, and are flagged in
    ``aliased``.  Pivoting drops the later of two dependent columns, so
    earlier design columns take precedence (reference-level dummy coding
    behaves the way model formulas expect).
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"design is {x.shape}, response has {y.shape[0]} rows"
        )
    if x.shape[0] < x.shape[1]:
        raise DimensionMismatchError("more columns than rows in the design")
    _check_finite(y, "response")
    _check_finite(x, "design")
    n, p = x.shape

    # Greedy sequential pivot: keep a column only if it adds rank beyond the
    # columns already kept.  This preserves left-to-right precedence exactly.
    kept = []
    r_cols = np.zeros((n, 0))
    scale = np.linalg.norm(x) if p else 0.0
    for j in range(p):
        col = x[:, j]
        resid = col - r_cols @ (r_cols.T @ col) if kept else col.copy()
        norm = np.linalg.norm(resid)
        if norm > 1e-10 * max(1.0, scale):
            kept.append(j)
            r_cols = np.column_stack([r_cols, resid / norm])
    kept_idx = np.array(kept, dtype=int)
    rank = len(kept)
    aliased = np.ones(p, dtype=bool)
    aliased[kept_idx] = False

    xk = x[:, kept_idx]
    # Normal solve through the orthonormal basis built above (numerically a QR solve).
    coef_k = np.linalg.solve(xk.T @ xk, xk.T @ y) if rank else np.zeros(0)
    fitted = xk @ coef_k if rank else np.zeros(n)
    residuals = y - fitted
    rss = float(residuals @ residuals)
    df = n - rank
    sigma2 = rss / df if df > 0 else 0.0
    se_k = (
        np.sqrt(np.diag(np.linalg.inv(xk.T @ xk)) * sigma2) if rank else np.zeros(0)
    )

    coefficients = np.zeros(p)
    ses = np.full(p, np.nan)
    coefficients[kept_idx] = coef_k
    ses[kept_idx] = se_k
    return OlsFit(
        coefficients=coefficients,
        residuals=residuals,
        residual_ss=rss,
        df_residual=df,
        coefficient_standard_errors=ses,
        design_rank=rank,
        aliased=aliased,
    )
