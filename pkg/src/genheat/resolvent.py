"""Frequency-domain problems ``-u'' + i xi a u = rhs`` on the periodic grid.

Discretisation is the cell-centred second difference
``N^2 (-u[j+1] + 2 u[j] - u[j-1]) + i xi a[j] u[j] = rhs[j]``; rows with
``a[j] = 0`` read ``-u'' = rhs`` without special handling.  At ``xi = 0`` the
representative with ``Σ a u = 0`` is returned.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .initial_data import CompatibleData, seminorm_a
from .measure import CapacityProfile
from .tridiag import NumericalBreakdown, cyclic_matvec, cyclic_solve

__all__ = [
    "FrequencyGrid",
    "ResolventFamily",
    "DecayReport",
    "SingularSystem",
    "SweepError",
    "solve_T",
    "solve_T_batch",
    "solve_k",
    "sweep",
    "decay_report",
    "write_family",
    "shifted_rhs",
    "apply_T",
    "diff_norms",
]

log = logging.getLogger(__name__)


class SingularSystem(ValueError):
    """``xi = 0`` with a right-hand side of nonzero mean."""


class SweepError(RuntimeError):
    def __init__(self, failures):
        self.failures = failures
        xs = ", ".join(f"{xi:g}" for xi, _ in failures)
        super().__init__(f"resolvent solve failed at xi = {xs}")


@dataclass(frozen=True)
class FrequencyGrid:
    xi_max: float = 4096.0
    n_freqs: int = 8192

    def __post_init__(self):
        if self.xi_max <= 0:
            raise ValueError("xi_max must be positive")
        if self.n_freqs < 0:
            raise ValueError("n_freqs must be nonnegative")

    @property
    def xi_values(self) -> np.ndarray:
        if self.n_freqs == 0:
            return np.zeros(1)
        return self.xi_max * np.arange(self.n_freqs + 1) / self.n_freqs


@dataclass(frozen=True, eq=False)
class ResolventFamily:
    grid: FrequencyGrid
    k: np.ndarray  # (n_freqs + 1, N) complex
    a: np.ndarray
    f: np.ndarray  # centred f used in the right-hand side
    g: np.ndarray
    residuals: np.ndarray = field(repr=False)
    fallback: np.ndarray = field(repr=False)

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi_values

    @property
    def fg_seminorm(self) -> float:
        return seminorm_a(self.a, self.f + self.g)


def _off(N):
    return -float(N) ** 2


def apply_T(xi, a, u):
    """``T_{xi,a} u`` on the grid; ``xi`` scalar or (B,) with ``u`` of shape (B, N)."""
    N = a.size
    xi = np.asarray(xi, dtype=float)
    diag = 2.0 * N ** 2 + 1j * (xi[..., None] if xi.ndim else xi) * a
    return cyclic_matvec(_off(N), diag, _off(N), u)


def diff_norms(a, u):
    """Discrete ``(‖u‖_2, ‖Du‖_2, [u]_a)`` along the last axis; ``D`` is the forward difference quotient."""
    N = a.size
    Du = N * (np.roll(u, -1, axis=-1) - u)
    l2 = np.sqrt(np.mean(np.abs(u) ** 2, axis=-1))
    dl2 = np.sqrt(np.mean(np.abs(Du) ** 2, axis=-1))
    sa = np.sqrt(np.sum(a * np.abs(u) ** 2, axis=-1) / N)
    return l2, dl2, sa


def _solve_zero(a, rhs, tol=1e-10):
    # -D2 u = rhs by double summation, then fix Σ a u = 0
    N = a.size
    mean = rhs.sum(axis=-1) / N
    scale = np.maximum(1.0, np.max(np.abs(rhs), axis=-1))
    if np.any(np.abs(mean) > tol * scale):
        raise SingularSystem(
            f"xi = 0 needs a mean-free right-hand side (mean {np.max(np.abs(mean)):.3e})")
    S = np.concatenate((np.zeros(rhs.shape[:-1] + (1,), rhs.dtype),
                        np.cumsum(rhs[..., :-1], axis=-1) / N), axis=-1)
    F = S.mean(axis=-1, keepdims=True) - S
    u = np.concatenate((np.zeros(rhs.shape[:-1] + (1,), rhs.dtype),
                        np.cumsum(F[..., 1:], axis=-1) / N), axis=-1)
    return u - (np.sum(a * u, axis=-1) / N)[..., None]


def solve_T_batch(xi, a, rhs):
    """Solve the periodic problem for each ``xi[b]`` and ``rhs[b]``.

    Returns ``(u, fallback)`` where ``fallback`` flags rows that needed the
    dense pivoted solver.
    """
    xi = np.asarray(xi, dtype=float)
    rhs = np.asarray(rhs, dtype=complex)
    N = a.size
    u = np.empty((xi.size, N), dtype=complex)
    fallback = np.zeros(xi.size, dtype=bool)
    zero = xi == 0
    if zero.any():
        u[zero] = _solve_zero(a, rhs[zero])
    nz = ~zero
    if nz.any():
        diag = 2.0 * N ** 2 + 1j * xi[nz, None] * a[None, :]
        u[nz], fb = cyclic_solve(_off(N), diag, _off(N), rhs[nz])
        fallback[nz] = fb
        if fb.any():
            log.warning("dense fallback used at xi = %s", xi[nz][fb])
    return u, fallback


def solve_T(xi: float, profile: CapacityProfile, rhs) -> np.ndarray:
    """Solve ``-u'' + i xi a u = rhs`` for one frequency."""
    a = profile.a_values
    rhs = np.asarray(rhs, dtype=complex)
    u, _ = solve_T_batch(np.array([xi]), a, rhs[None, :])
    return u[0]


def shifted_rhs(xi, data: CompatibleData):
    """Right-hand sides ``a (f + g) / (1 + i xi)`` of the split problem, shape (len(xi), N)."""
    fg = data.a * (data.centered_f + data.g)
    return fg[None, :] / (1.0 + 1j * np.asarray(xi, dtype=float))[:, None]


def solve_k(xi: float, profile: CapacityProfile, data: CompatibleData) -> np.ndarray:
    """The regular part ``k = u - f / (1 + i xi)`` of the resolvent solution."""
    return solve_T(xi, profile, shifted_rhs(np.array([xi]), data)[0])


def sweep(grid: FrequencyGrid, profile: CapacityProfile, data: CompatibleData,
          workers: int = 1, chunk: int = 512) -> ResolventFamily:
    """Solve for ``k`` at every frequency of ``grid``.

    The frequencies are cut into fixed chunks independent of ``workers``, so
    results do not depend on the pool size.
    """
    a = profile.a_values
    xi = grid.xi_values
    N = a.size
    blocks = [slice(i, min(i + chunk, xi.size)) for i in range(0, xi.size, chunk)]

    def run(sl):
        rhs = shifted_rhs(xi[sl], data)
        try:
            k, fb = solve_T_batch(xi[sl], a, rhs)
        except (NumericalBreakdown, SingularSystem) as exc:
            return sl, None, None, None, exc
        diag = 2.0 * N ** 2 + 1j * xi[sl, None] * a
        res = np.max(np.abs(cyclic_matvec(_off(N), diag, _off(N), k) - rhs), axis=1)
        res /= np.maximum(np.max(np.abs(rhs), axis=1), 1e-300)
        return sl, k, res, fb, None

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(sl) for sl in blocks]

    k = np.empty((xi.size, N), dtype=complex)
    residuals = np.empty(xi.size)
    fallback = np.zeros(xi.size, dtype=bool)
    failures = []
    for sl, kb, res, fb, exc in results:
        if exc is not None:
            failures.extend((x, exc) for x in xi[sl])
            continue
        k[sl], residuals[sl], fallback[sl] = kb, res, fb
    if failures:
        raise SweepError(failures)
    return ResolventFamily(grid=grid, k=k, a=a, f=data.centered_f, g=data.g,
                           residuals=residuals, fallback=fallback)


@dataclass(frozen=True, eq=False)
class DecayReport:
    table: np.ndarray  # columns: xi, sup_x |k|, xi^{3/2} sup|k| / [f+g]_a
    c_hat: float
    seminorm: float


def decay_report(family: ResolventFamily) -> DecayReport:
    """Scaled sup norms of ``k``; ``c_hat`` is the largest scaled value over ``xi >= 1``."""
    xi = family.xi
    sup = np.max(np.abs(family.k), axis=1)
    s = family.fg_seminorm
    scaled = xi ** 1.5 * sup / s if s > 0 else np.zeros_like(sup)
    table = np.column_stack((xi, sup, scaled))
    mask = xi >= 1.0
    c_hat = float(scaled[mask].max()) if mask.any() else 0.0
    return DecayReport(table=table, c_hat=c_hat, seminorm=s)


def write_family(path, family: ResolventFamily):
    """Plain-text dump, one line per (xi, j): ``xi j re_k im_k``."""
    xi = family.xi
    N = family.a.size
    rows = np.column_stack((
        np.repeat(xi, N),
        np.tile(np.arange(N), xi.size),
        family.k.real.ravel(),
        family.k.imag.ravel(),
    ))
    np.savetxt(path, rows, fmt=["%.17g", "%d", "%.17g", "%.17g"],
               header="xi j re_k im_k")
