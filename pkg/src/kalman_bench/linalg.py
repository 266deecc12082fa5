"""Small dense linear algebra for the filters.

Vectors are 1-D float arrays and matrices 2-D float arrays. Sizes in this
package never exceed 5x5, so the factorization is a plain column-by-column
Cholesky rather than a call into LAPACK; that keeps the failing pivot index
available for error reporting.
"""

from __future__ import annotations

import math

import numpy as np

from kalman_bench.errors import DimensionError, NotPositiveDefiniteError

SYMMETRY_RTOL = 1e-9


def as_vec(x, name: str = "vector") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    return v


def as_mat(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or 0 in m.shape:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_mat(a, "left operand")
    b = as_mat(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def is_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
    return bool(np.max(np.abs(a - a.T)) <= rtol * scale)


def cholesky(a, *, allow_semidefinite: bool = False, zero_tol: float = 1e-14) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == a.

    The input is symmetrized before factorization. With
    ``allow_semidefinite`` a pivot that is zero up to ``zero_tol`` (relative to
    the largest diagonal entry) yields an all-zero column instead of an error,
    which is what sampling from a covariance with zero-variance components
    needs.

    Raises:
        DimensionError: ``a`` is not square.
        ValueError: ``a`` is not symmetric to relative 1e-9.
        NotPositiveDefiniteError: a pivot is not positive; carries its index.
    """
    a = as_mat(a)
    n, m = a.shape
    if n != m:
        raise DimensionError(f"cholesky needs a square matrix, got {n}x{m}")
    if not np.all(np.isfinite(a)):
        raise ValueError("cholesky input has non-finite entries")
    if not is_symmetric(a):
        raise ValueError("cholesky input is not symmetric within relative 1e-9")
    a = symmetrize(a)
    max_diag = max(float(np.max(np.abs(np.diag(a)))), 0.0)
    floor = zero_tol * max_diag if allow_semidefinite else 0.0

    low = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot > floor:
            d = math.sqrt(pivot)
            low[j, j] = d
            if j + 1 < n:
                low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / d
            continue
        if allow_semidefinite and pivot >= -floor:
            # zero-variance direction: the off-diagonal remainder must vanish too
            rest = a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]
            if rest.size == 0 or np.max(np.abs(rest)) <= math.sqrt(zero_tol) * max_diag:
                continue
        raise NotPositiveDefiniteError(j, float(pivot))
    return low


def _forward(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    y = np.empty_like(b)
    for i in range(low.shape[0]):
        y[i] = (b[i] - low[i, :i] @ y[:i]) / low[i, i]
    return y


def _backward(low: np.ndarray, y: np.ndarray) -> np.ndarray:
    # solves low.T @ x = y
    n = low.shape[0]
    x = np.empty_like(y)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - low[i + 1:, i] @ x[i + 1:]) / low[i, i]
    return x


def solve_spd(a, rhs) -> np.ndarray:
    """Solve ``a @ x = rhs`` for symmetric positive-definite ``a``.

    ``rhs`` may be a vector or a matrix; the result has the same shape.
    Factorization errors propagate unchanged.
    """
    a = as_mat(a)
    b = np.asarray(rhs, dtype=float)
    vector_rhs = b.ndim == 1
    if vector_rhs:
        b = b[:, None]
    b = as_mat(b, "right-hand side")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"cannot solve {a.shape[0]}x{a.shape[1]} system with {b.shape[0]}x{b.shape[1]} rhs")
    low = cholesky(a)
    x = _backward(low, _forward(low, b))
    return x[:, 0] if vector_rhs else x
