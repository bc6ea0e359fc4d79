"""Batched cyclic tridiagonal elimination.

Solves many periodic tridiagonal systems that share their off-diagonals but
differ in the main diagonal (one system per frequency).  The corners are
removed by a Sherman-Morrison rank-one correction so that each system costs
two Thomas sweeps; the loop runs over the grid index and is vectorised over
the batch.  Systems whose pivots degenerate are re-solved densely with
partial pivoting.
"""

import numpy as np

__all__ = ["NumericalBreakdown", "cyclic_solve", "cyclic_matvec", "cyclic_dense"]


class NumericalBreakdown(ArithmeticError):
    """Elimination failed even after the dense pivoted fallback."""


def cyclic_dense(lower, diag, upper):
    """Dense matrix of one cyclic system (``diag`` of shape (N,))."""
    N = diag.size
    lower = np.broadcast_to(lower, (N,))
    upper = np.broadcast_to(upper, (N,))
    A = np.diag(diag).astype(np.result_type(diag, lower, upper))
    j = np.arange(N)
    A[j, (j - 1) % N] += lower
    A[j, (j + 1) % N] += upper
    return A


def cyclic_matvec(lower, diag, upper, x):
    """``A x`` for a batch of cyclic systems; ``x`` has shape (..., N)."""
    return lower * np.roll(x, 1, axis=-1) + diag * x + upper * np.roll(x, -1, axis=-1)


def _thomas(lower, diag, upper, rhs, pivot_tol):
    """Non-cyclic sweep; ``diag`` (B, N), ``rhs`` (B, N, R).  Returns (x, ok)."""
    B, N = diag.shape
    cp = np.empty_like(diag)
    dp = np.empty_like(rhs)
    scale = np.max(np.abs(diag), axis=1)
    ok = np.ones(B, dtype=bool)

    den = diag[:, 0]
    ok &= np.abs(den) > pivot_tol * scale
    den = np.where(ok, den, 1.0)
    cp[:, 0] = upper[0] / den
    dp[:, 0] = rhs[:, 0] / den[:, None]
    for j in range(1, N):
        den = diag[:, j] - lower[j] * cp[:, j - 1]
        bad = np.abs(den) <= pivot_tol * scale
        if bad.any():
            ok &= ~bad
            den = np.where(bad, 1.0, den)
        cp[:, j] = upper[j] / den
        dp[:, j] = (rhs[:, j] - lower[j] * dp[:, j - 1]) / den[:, None]
    for j in range(N - 2, -1, -1):
        dp[:, j] -= cp[:, j, None] * dp[:, j + 1]
    return dp, ok


def cyclic_solve(lower, diag, upper, rhs, pivot_tol=1e-14):
    """Solve ``A_b x_b = rhs_b`` for each row ``b`` of a batch.

    Parameters
    ----------
    lower, upper : scalar or (N,) array
        ``A[j, j-1]`` and ``A[j, j+1]`` with indices taken mod N, shared by
        the whole batch.  ``lower[0]`` and ``upper[N-1]`` are the corners.
    diag : (B, N) array
        Main diagonals.
    rhs : (B, N) array

    Returns
    -------
    x : (B, N) array
    fallback : (B,) bool array, True where the dense solver was used.
    """
    diag = np.atleast_2d(diag)
    rhs = np.atleast_2d(rhs)
    B, N = diag.shape
    dtype = np.result_type(diag, rhs, lower, upper)
    lower = np.broadcast_to(np.asarray(lower, dtype=dtype), (N,))
    upper = np.broadcast_to(np.asarray(upper, dtype=dtype), (N,))
    diag = diag.astype(dtype, copy=False)

    top_right, bottom_left = lower[0], upper[N - 1]
    # any nonzero shift works; -diag[0] keeps the first pivot unchanged
    gamma = np.where(diag[:, 0] != 0, -diag[:, 0], -1.0)
    T = diag.copy()
    T[:, 0] -= gamma
    T[:, -1] -= bottom_left * top_right / gamma

    u = np.zeros((B, N), dtype=dtype)
    u[:, 0] = gamma
    u[:, -1] = bottom_left
    both = np.stack((rhs.astype(dtype, copy=False), u), axis=-1)
    sol, ok = _thomas(lower, T, upper, both, pivot_tol)
    y, z = sol[..., 0], sol[..., 1]

    vy = y[:, 0] + top_right * y[:, -1] / gamma
    vz = 1.0 + z[:, 0] + top_right * z[:, -1] / gamma
    ok &= np.abs(vz) > pivot_tol
    x = y - (vy / np.where(ok, vz, 1.0))[:, None] * z

    fallback = ~ok
    for b in np.flatnonzero(fallback):
        A = cyclic_dense(lower, diag[b], upper)
        if np.linalg.cond(A) * np.finfo(float).eps > 1e-2:
            raise NumericalBreakdown(f"singular cyclic system in batch row {b}")
        x[b] = np.linalg.solve(A, rhs[b])
    return x, fallback
