"""Dense real-matrix helpers: least squares, extreme singular values, and
the operator norms that appear in the reconstruction error bounds.

Matrices are plain 2-D ``float64`` numpy arrays.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimMismatch, RankDeficient, TooLarge

RANK_TOL = 1e-10
MAX_SIGN_COLUMNS = 24


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array, promoting vectors to rows."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def singular_values(a) -> np.ndarray:
    """Singular values in decreasing order."""
    return np.linalg.svd(as_matrix(a), compute_uv=False)


def sigma_min(a) -> float:
    """Smallest singular value, counting ``min(rows, cols)`` values.

    For a wide matrix this is the ``min(rows, cols)``-th singular value; the
    library only calls it on tall or square matrices.
    """
    return float(singular_values(a)[-1])


def sigma_max(a) -> float:
    return float(singular_values(a)[0])


def least_squares_apply(a, b, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Return ``pinv(A) @ B`` for a tall, full-column-rank ``A``.

    Uses a thin QR factorization (so the conditioning is that of ``A``, not
    ``A.T @ A``).  ``B`` may be a vector, in which case a vector is returned.

    Raises
    ------
    RankDeficient
        If ``sigma_min(A) <= rank_tol * sigma_max(A)``.
    """
    A = as_matrix(a, "A")
    b_arr = np.asarray(b, dtype=float)
    vector_rhs = b_arr.ndim == 1
    B = b_arr[:, None] if vector_rhs else b_arr
    p, k = A.shape
    if B.ndim != 2 or B.shape[0] != p:
        raise DimMismatch(f"A has {p} rows but B has shape {b_arr.shape}")
    if p < k:
        raise RankDeficient(f"{p}x{k} matrix cannot have column rank {k}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficient(
            f"numerical rank below {k}: sigma_min/sigma_max = "
            f"{(s[-1] / s[0]) if s[0] else 0.0:.3e}"
        )
    Q, R = np.linalg.qr(A, mode="reduced")
    X = solve_triangular(R, Q.T @ B, lower=False)
    return X[:, 0] if vector_rhs else X


def norm_inf_inf(a) -> float:
    """Maximum absolute row sum."""
    return float(np.max(np.sum(np.abs(as_matrix(a)), axis=1)))


def norm_2_inf(a) -> float:
    """Largest row 2-norm, i.e. the operator norm from l2 to l-infinity."""
    return float(np.max(np.linalg.norm(as_matrix(a), axis=1)))


def norm_inf_2_exact(a, chunk: int = 1 << 15) -> tuple[float, float]:
    """Exact l-infinity to l2 operator norm by enumerating sign vectors.

    The norm of a convex function over the cube is attained at a vertex, so
    ``max ||A s||_2`` over ``s in {-1, 1}^m`` is exact.  Only half of the
    sign vectors are visited (``s`` and ``-s`` give the same value).

    Returns
    -------
    (exact, bound)
        ``bound = sqrt(rows) * norm_inf_inf(A)`` is the cheap upper bound.
    """
    A = as_matrix(a)
    k, m = A.shape
    if m > MAX_SIGN_COLUMNS:
        raise TooLarge(f"{m} columns > {MAX_SIGN_COLUMNS}; 2^{m} sign vectors")
    bound = float(np.sqrt(k)) * norm_inf_inf(A)
    # fix the last sign to +1, enumerate the remaining m-1 bits
    n_free = m - 1
    total = 1 << n_free
    bits = np.arange(n_free, dtype=np.int64)
    last = A[:, -1]
    best = 0.0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        signs = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        vals = signs @ A[:, :-1].T + last
        best = max(best, float(np.max(np.einsum("ij,ij->i", vals, vals))))
    return float(np.sqrt(best)), bound
