"""Dense least-squares kernel: pivoted Householder QR, rank detection, SPD inverse.

Matrices are plain 2-D float64 ndarrays (row-major). The solver deliberately
avoids the normal equations: small econometric designs with near-collinear
dummies lose half the available precision under X'X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefiniteError, RankDeficientError

#: Relative rank tolerance, applied against the largest column norm.
DEFAULT_RANK_TOL = 1e-10


def as_matrix(a, name="matrix"):
    """Validate and return a 2-D float64 array with finite entries."""
    out = np.asarray(a, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains NaN or Inf")
    return out


def as_vector(a, name="vector"):
    """Validate and return a 1-D float64 array with finite entries."""
    out = np.asarray(a, dtype=float).reshape(-1)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains NaN or Inf")
    return out


@dataclass(frozen=True)
class LeastSquaresSolution:
    """Full-rank least-squares fit of y on X."""

    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    rank: int
    xtx_inverse: np.ndarray


def _householder_qr_pivoted(x, y=None):
    """Factor X P = Q R with column pivoting; optionally accumulate Q'y.

    Returns (r, pivots, qty) where r holds the triangular factor in its upper
    part and pivots maps factor columns back to original columns.
    """
    r = x.copy()
    n, p = r.shape
    qty = None if y is None else y.copy()
    pivots = np.arange(p)

    for k in range(min(n, p)):
        # Exact remaining column norms each step; p stays small here.
        norms = np.einsum("ij,ij->j", r[k:, k:], r[k:, k:])
        j = k + int(np.argmax(norms))
        if j != k:
            r[:, [k, j]] = r[:, [j, k]]
            pivots[[k, j]] = pivots[[j, k]]

        col = r[k:, k]
        norm = float(np.linalg.norm(col))
        if norm == 0.0:
            continue
        v = col.copy()
        # Sign chosen to avoid cancellation in the leading entry.
        v[0] += math.copysign(norm, col[0]) if col[0] != 0.0 else norm
        vnorm = float(np.linalg.norm(v))
        if vnorm == 0.0:
            continue
        v /= vnorm
        r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        if qty is not None:
            qty[k:] -= 2.0 * v * float(v @ qty[k:])

    return r, pivots, qty


def _back_substitute(r, b):
    p = r.shape[0]
    out = np.zeros(p)
    for i in range(p - 1, -1, -1):
        out[i] = (b[i] - r[i, i + 1 :] @ out[i + 1 :]) / r[i, i]
    return out


def _upper_triangular_inverse(r):
    p = r.shape[0]
    inv = np.zeros((p, p))
    for j in range(p - 1, -1, -1):
        inv[j, j] = 1.0 / r[j, j]
        for i in range(j - 1, -1, -1):
            inv[i, j] = -(r[i, i + 1 : j + 1] @ inv[i + 1 : j + 1, j]) / r[i, i]
    return inv


def _column_scale(x):
    if x.size == 0:
        return 1.0
    norms = np.sqrt(np.einsum("ij,ij->j", x, x))
    top = float(np.max(norms))
    return top if top > 0.0 else 1.0


def numerical_rank(x, tol=DEFAULT_RANK_TOL):
    """Numerical rank of X, counting pivoted-QR diagonals above tol * scale."""
    x = as_matrix(x, "X")
    if x.size == 0:
        return 0
    r, _, _ = _householder_qr_pivoted(x)
    k = min(x.shape)
    diag = np.abs(np.diag(r)[:k])
    return int(np.sum(diag > tol * _column_scale(x)))


def solve_least_squares(x, y, tol=DEFAULT_RANK_TOL):
    """Minimize ||y - X b|| via pivoted Householder QR.

    Parameters
    ----------
    x : (n, p) array, n >= p
    y : (n,) array
    tol : float
        Relative rank tolerance.

    Returns
    -------
    LeastSquaresSolution
        Coefficients, fitted values, residuals, rank and (X'X)^-1.

    Raises
    ------
    RankDeficientError
        When the numerical rank is below p. Columns are reported, never
        silently dropped.
    """
    x = as_matrix(x, "X")
    y = as_vector(y, "y")
    n, p = x.shape
    if y.shape[0] != n:
        raise ValueError(f"X has {n} rows but y has {y.shape[0]}")
    if n < p:
        raise ValueError(f"need at least as many rows as columns, got {n} x {p}")

    r, pivots, qty = _householder_qr_pivoted(x, y)
    diag = np.abs(np.diag(r)[:p])
    rank = int(np.sum(diag > tol * _column_scale(x)))
    if rank < p:
        raise RankDeficientError(sorted(int(c) for c in pivots[rank:]))

    upper = r[:p, :p]
    beta = np.zeros(p)
    beta[pivots] = _back_substitute(upper, qty[:p])

    fitted = x @ beta
    residuals = y - fitted

    # (X'X)^-1 = P (R'R)^-1 P' with R from the pivoted factorization.
    rinv = _upper_triangular_inverse(upper)
    w = rinv @ rinv.T
    xtx_inv = np.zeros((p, p))
    xtx_inv[np.ix_(pivots, pivots)] = w

    return LeastSquaresSolution(
        coefficients=beta,
        fitted=fitted,
        residuals=residuals,
        rank=rank,
        xtx_inverse=xtx_inv,
    )


def invert_spd(a, symmetry_tol=1e-8):
    """Invert a symmetric positive definite matrix via Cholesky.

    Raises NotPositiveDefiniteError when a pivot fails, which signals a
    degenerate covariance rather than a numerical slip.
    """
    a = as_matrix(a, "A")
    p, q = a.shape
    if p != q:
        raise ValueError(f"matrix must be square, got {p} x {q}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if p and float(np.max(np.abs(a - a.T))) > symmetry_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    a = 0.5 * (a + a.T)

    chol = np.zeros_like(a)
    for j in range(p):
        d = a[j, j] - chol[j, :j] @ chol[j, :j]
        if not (d > 0.0 and math.isfinite(d)):
            raise NotPositiveDefiniteError(j)
        chol[j, j] = math.sqrt(d)
        if j + 1 < p:
            chol[j + 1 :, j] = (a[j + 1 :, j] - chol[j + 1 :, :j] @ chol[j, :j]) / chol[j, j]

    # A^-1 = L^-T L^-1 from the lower-triangular inverse.
    linv = np.zeros_like(chol)
    for j in range(p):
        linv[j, j] = 1.0 / chol[j, j]
        for i in range(j + 1, p):
            linv[i, j] = -(chol[i, j:i] @ linv[j:i, j]) / chol[i, i]
    inv = linv.T @ linv
    return 0.5 * (inv + inv.T)
