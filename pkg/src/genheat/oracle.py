"""Direct time stepping of ``a v_t = v_xx`` as a differential-algebraic system.

This is the independent second backend.  The θ-scheme

    (diag(a) - dt θ D2) v^{n+1} = diag(a) v^n + dt (1 - θ) D2 v^n

uses the periodic second difference ``D2`` (times ``N^2``).  Rows with
``a_j = 0`` carry no time derivative: they are the algebraic constraints
``(D2 v)_j = 0`` that make the solution affine across plateaus.  The matrix
does not change between steps and is factored once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .measure import CapacityProfile, cell_centers
from .synthesis import SolutionField

__all__ = [
    "SchemeConfig",
    "SingularScheme",
    "NoPlateaus",
    "RobinTable",
    "second_difference",
    "step_scheme",
    "robin_flux_check",
]

log = logging.getLogger(__name__)


class SingularScheme(ArithmeticError):
    """The step matrix could not be factored."""


class NoPlateaus(ValueError):
    """The capacity has no interval with ``a = 0``."""


@dataclass(frozen=True)
class SchemeConfig:
    dt: float = 1e-4
    theta: float = 1.0
    t_end: float = 2.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.theta not in (0.5, 1.0):
            raise ValueError("theta must be 1 or 1/2")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")


def second_difference(N: int) -> sp.csc_matrix:
    """Periodic ``N^2 (u[j+1] - 2 u[j] + u[j-1])`` as a sparse matrix."""
    j = np.arange(N)
    rows = np.concatenate((j, j, j))
    cols = np.concatenate((j, (j + 1) % N, (j - 1) % N))
    vals = np.concatenate((np.full(N, -2.0), np.ones(N), np.ones(N))) * float(N) ** 2
    return sp.csc_matrix((vals, (rows, cols)), shape=(N, N))


def _sample_schedule(times, dt):
    # step index at or after each sample and the weight of the earlier state
    n_hi = np.ceil(times / dt - 1e-9).astype(np.int64)
    frac = n_hi - times / dt
    frac[np.abs(frac) < 1e-9] = 0.0
    return n_hi, frac


def step_scheme(profile: CapacityProfile, f0, cfg: SchemeConfig,
                sample_times) -> SolutionField:
    """Advance ``f0`` and record ``v`` at ``sample_times``.

    Samples falling between steps are interpolated linearly in time.  The
    sample at ``t = 0`` is ``f0`` itself.  After every step the ``a``-mass is
    reset to its initial value by adding a constant (constants lie in the
    kernel of ``D2``), which keeps conservation at the rounding level over
    long runs.

    Raises
    ------
    SingularScheme
        If the factorisation fails; cannot happen for a valid profile.
    """
    a = np.asarray(profile.a_values, dtype=float)
    N = a.size
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != (N,) or not np.all(np.isfinite(f0)):
        raise ValueError(f"f0 must be {N} finite values")
    times = np.asarray(sample_times, dtype=float)
    if np.any(times < 0) or np.any(times > cfg.t_end * (1 + 1e-12)):
        raise ValueError("sample times must lie in [0, t_end]")
    if np.any(np.diff(times) < 0):
        raise ValueError("sample times must be sorted")
    if cfg.theta != 1.0 and np.any(a == 0):
        log.warning("theta = 1/2 with plateaus: the algebraic rows may oscillate")

    dt, th = cfg.dt, cfg.theta
    D2 = second_difference(N)
    M = (sp.diags(a) - (dt * th) * D2).tocsc()
    try:
        lu = splu(M)
    except RuntimeError as exc:
        raise SingularScheme(str(exc)) from exc
    explicit = None if th == 1.0 else (dt * (1.0 - th)) * D2

    n_hi, frac = _sample_schedule(times, dt)
    out = np.empty((times.size, N))
    out[times == 0] = f0

    area = a.sum() / N
    target = np.dot(a, f0) / N
    slack = 1e-12 * max(1.0, float(np.max(np.abs(f0))))
    v = f0.copy()
    prev = v
    n_last = int(n_hi.max()) if times.size else 0
    order = np.argsort(n_hi, kind="stable")
    k = int(np.sum(n_hi == 0))
    for n in range(1, n_last + 1):
        rhs = a * v
        if explicit is not None:
            rhs = rhs + explicit @ v
        new = lu.solve(rhs)
        if not np.all(np.isfinite(new)):
            raise SingularScheme(f"non-finite state at step {n}")
        new += (target - np.dot(a, new) / N) / area
        if th == 1.0 and (new.max() > v.max() + slack or new.min() < v.min() - slack):
            raise SingularScheme(f"maximum principle violated at step {n}")
        prev, v = v, new
        while k < order.size and n_hi[order[k]] == n:
            i = order[k]
            w = frac[i]
            out[i] = v if w == 0.0 else (1.0 - w) * v + w * prev
            k += 1
    return SolutionField(times=times, x=cell_centers(N), v=out,
                         mean=float(target), a=a, backend="oracle",
                         tail_bound=None)


@dataclass(frozen=True, eq=False)
class RobinTable:
    """Flux balance at the edges ``r < s`` of one plateau.

    ``table`` columns: ``t``, slope at ``r`` from outside, slope at ``s``
    from outside, ``b (v(s) - v(r))`` with ``b = 1 / (s - r)``.
    """

    table: np.ndarray
    b: float
    edges: tuple[float, float]
    tolerance: np.ndarray  # per time: rel_tol * max |v_x|

    @property
    def discrepancy(self) -> np.ndarray:
        left, right, jump = self.table[:, 1], self.table[:, 2], self.table[:, 3]
        return np.maximum(np.abs(left - right), np.abs(left - jump))

    @property
    def agree(self) -> bool:
        return bool(np.all(self.discrepancy <= self.tolerance))


def _edge_slope(z0, v0, z1, v1, z2, v2):
    # derivative at z0 of the quadratic through three points
    return (v0 * (2 * z0 - z1 - z2) / ((z0 - z1) * (z0 - z2))
            + v1 * (z0 - z2) / ((z1 - z0) * (z1 - z2))
            + v2 * (z0 - z1) / ((z2 - z0) * (z2 - z1)))


def robin_flux_check(sol: SolutionField, profile: CapacityProfile,
                     index: int | None = None, rel_tol: float = 5e-2) -> RobinTable:
    """One-sided slopes at the plateau edges against ``b`` times the jump.

    The plateau values at the edges come from a least-squares line through
    the plateau cells; the outside slopes from the quadratic through that
    edge value and the two nearest cells outside.
    """
    plateaus = profile.plateaus
    if not plateaus:
        raise NoPlateaus("capacity profile has no plateau")
    if index is None:
        if len(plateaus) != 1:
            raise ValueError(f"{len(plateaus)} plateaus; pass index")
        index = 0
    r, s, _ = plateaus[index]
    N = profile.n_cells
    cells = profile.plateau_cells(plateaus[index])
    if cells.size < 2:
        raise ValueError("plateau spans fewer than two cells")
    lo = int(np.ceil(r * N - 1e-9))
    hi = lo + cells.size  # first cell past the plateau (unwrapped)
    xs = (np.arange(lo, hi) + 0.5) / N
    left_idx = np.array([lo - 1, lo - 2])
    right_idx = np.array([hi, hi + 1])
    # edges snapped to the cell faces bounding the plateau cells
    r_in = lo / N
    s_in = hi / N
    x_left = (left_idx + 0.5) / N
    x_right = (right_idx + 0.5) / N

    rows = []
    tol = []
    for t, v in zip(sol.times, sol.v):
        slope, icpt = np.polyfit(xs - r_in, v[cells], 1)
        vr = icpt
        vs = icpt + slope * (s_in - r_in)
        vl = v[left_idx % N]
        vrr = v[right_idx % N]
        left = _edge_slope(r_in, vr, x_left[0], vl[0], x_left[1], vl[1])
        right = _edge_slope(s_in, vs, x_right[0], vrr[0], x_right[1], vrr[1])
        jump = (vs - vr) / (s_in - r_in)
        rows.append((t, left, right, jump))
        tol.append(rel_tol * N * np.max(np.abs(np.diff(np.append(v, v[0])))))
    return RobinTable(table=np.array(rows), b=1.0 / (s - r), edges=(r, s),
                      tolerance=np.array(tol))
