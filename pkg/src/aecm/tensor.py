"""Dense float64 matrix helpers: products, stable softmax, pseudo-inverse, RNG."""

from __future__ import annotations

import numpy as np


class SingularMatrixError(ValueError):
    """Raised when a matrix is rank deficient beyond the ridge rescue."""


def as_matrix(x) -> np.ndarray:
    """Coerce to a C-contiguous 2-D float64 array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got ndim={a.ndim}")
    return a


def check_finite(x: np.ndarray, what: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")
    return x


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def row_softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction, each output row sums to 1."""
    shifted = x - np.max(x, axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=1, keepdims=True)


def gauss_solve(a: np.ndarray, b: np.ndarray, pivot_tol: float = 1e-12) -> np.ndarray:
    """Solve a @ x = b by Gaussian elimination with partial pivoting.

    Raises SingularMatrixError if the best available pivot falls below
    ``pivot_tol``.
    """
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape[0] != n:
        raise ValueError(f"gauss_solve shape mismatch: {a.shape}, {b.shape}")
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot_row, col]) < pivot_tol:
            raise SingularMatrixError(f"pivot below {pivot_tol} in column {col}")
        if pivot_row != col:
            a[[col, pivot_row]] = a[[pivot_row, col]]
            b[[col, pivot_row]] = b[[pivot_row, col]]
        factors = a[col + 1 :, col] / a[col, col]
        a[col + 1 :, col:] -= factors[:, None] * a[col, col:]
        b[col + 1 :] -= factors[:, None] * b[col]
    x = np.zeros_like(b)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x


def pseudo_inverse(w: np.ndarray) -> np.ndarray:
    """Right pseudo-inverse of a full-row-rank K x d matrix (K <= d).

    Returns the d x K matrix P = w^T (w w^T)^-1 with w @ P = I_K. The K x K
    system is solved by Gaussian elimination; a ridge of 1e-10 * I is added
    once if a pivot degenerates, and rank deficiency past that raises
    SingularMatrixError.
    """
    w = as_matrix(w)
    k, d = w.shape
    if k > d:
        raise ValueError(f"pseudo_inverse expects K <= d, got {k} x {d}")
    gram = w @ w.T
    eye = np.eye(k)
    try:
        inv = gauss_solve(gram, eye)
    except SingularMatrixError:
        try:
            inv = gauss_solve(gram + 1e-10 * eye, eye)
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                "rows are rank deficient beyond ridge rescue"
            ) from exc
        # the ridge can make an exactly singular system solvable in floating
        # point; only accept it if the inverse contract still holds
        if np.abs(w @ (w.T @ inv) - eye).max() > 1e-8:
            raise SingularMatrixError("rows are rank deficient beyond ridge rescue")
    return w.T @ inv


def standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center each column and scale to unit population variance.

    Columns with standard deviation below 1e-12 are centered but not scaled;
    the returned stds hold the divisor actually applied (1.0 for those).
    """
    x = as_matrix(x)
    if x.shape[0] < 2:
        raise ValueError("standardize needs at least 2 rows")
    means = x.mean(axis=0)
    centered = x - means
    stds = centered.std(axis=0)
    stds = np.where(stds < 1e-12, 1.0, stds)
    return centered / stds, means, stds


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_normal(
    rng: np.random.Generator, rows: int, cols: int, mean: float = 0.0, std: float = 1.0
) -> np.ndarray:
    if std < 0:
        raise ValueError("std must be >= 0")
    return mean + std * rng.standard_normal((rows, cols))


def sample_uniform(
    rng: np.random.Generator, rows: int, cols: int, lo: float = 0.0, hi: float = 1.0
) -> np.ndarray:
    if lo > hi:
        raise ValueError("lo must be <= hi")
    return lo + (hi - lo) * rng.random((rows, cols))
