"""Initial data for ``a v_t = v_xx``: the pair ``(f, g)`` with ``f'' = a g``.

Grid functions are plain 1-D arrays of length ``N`` sampled at the cell
centers ``(j + 1/2) / N`` of the image coordinate.  Data can be built from a
y-space datum ``g_W = L_W h`` (always compatible) or from user samples of
``f`` and ``f''`` (validated, rejected when ``f''`` does not vanish on the
plateaus).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .measure import (CapacityProfile, MeasureSpec, capacity, cell_centers,
                      eval_W, eval_w, gauss_panels)

__all__ = [
    "CompatibleData",
    "NonZeroMean",
    "IncompatibleData",
    "from_yspace",
    "from_xspace",
    "compose_h",
    "periodic_interpolant",
    "PeriodicSamples",
    "a_mean",
    "seminorm_a",
]


class NonZeroMean(ValueError):
    """The y-space datum does not integrate to zero, so it is not ``L_W`` of anything."""


class IncompatibleData(ValueError):
    """``f''`` is not of the form ``a g`` with ``g`` bounded."""

    def __init__(self, message, plateau=None, cells=None):
        super().__init__(message)
        self.plateau = plateau
        self.cells = cells


@dataclass(frozen=True, eq=False)
class CompatibleData:
    f: np.ndarray
    f_second: np.ndarray
    g: np.ndarray
    mean: float
    centered_f: np.ndarray
    a: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.f.size

    def compatibility_defect(self) -> float:
        return float(np.max(np.abs(self.f_second - self.a * self.g)))


def a_mean(a, values) -> float:
    """``Σ a_j v_j / N``."""
    return float(np.sum(a * values) / a.size)


def seminorm_a(a, values) -> float:
    """Discrete ``[u]_a = sqrt(Σ a_j |u_j|^2 / N)``."""
    return float(np.sqrt(np.sum(a * np.abs(values) ** 2) / a.size))


class PeriodicSamples:
    """Periodic piecewise-linear interpolant of cell-centred samples on [0, 1).

    Its integral over a period is the sample mean, which is kept as ``mean``.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        M = values.size
        self._xs = np.concatenate(([-0.5 / M], cell_centers(M), [1 + 0.5 / M]))
        self._vs = np.concatenate(([values[-1]], values, [values[0]]))
        self.mean = float(values.mean())

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.interp(y - np.floor(y), self._xs, self._vs)


def _mean_of(gW) -> float:
    if isinstance(gW, PeriodicSamples):
        return gW.mean
    nodes, weights = gauss_panels([0.0, 1.0], 4096)
    return float(np.sum(weights * gW(nodes)))


def _finish(f, f_second, g, a) -> CompatibleData:
    m = a_mean(a, f)
    return CompatibleData(f=f, f_second=f_second, g=g, mean=m,
                          centered_f=f - m, a=a)


def from_yspace(gW, b: float, spec: MeasureSpec, N: int, tol: float = 1e-10,
                profile: CapacityProfile | None = None) -> CompatibleData:
    """Build ``f`` with ``f'' = a (g_W ∘ w)`` and ``f(0) = b`` on the N-cell grid.

    ``gW`` is a 1-periodic vectorised callable of y, or an array of y-space
    cell-centre samples.  The products ``a_j g_j`` are exact cell averages,
    ``N ∫_{w(cell j)} g_W dy``, so they sum to ``∫ g_W`` (projected to zero
    after the admissibility check).  ``f`` is then the periodic discrete
    double primitive: its second difference quotient equals ``a g`` to
    rounding and it is affine on plateau cells.
    """
    if not callable(gW):
        gW = PeriodicSamples(gW)
    mean = _mean_of(gW)
    if abs(mean) > tol:
        raise NonZeroMean(f"∫ g_W dy = {mean:.3e}, exceeds {tol:.1e}")
    if profile is None:
        profile = capacity(spec, N)
    a = profile.a_values

    y_edges = eval_w(spec, np.arange(N + 1) / N)
    nodes, weights = gauss_panels(y_edges, 8 * N)
    cell = np.clip(np.searchsorted(y_edges, nodes, side="right") - 1, 0, N - 1)
    ag = N * np.bincount(cell, weights=weights * gW(nodes), minlength=N)
    ag -= a * (ag.sum() / N)

    x = cell_centers(N)
    pos = a > 0
    g = np.where(pos, ag / np.where(pos, a, 1.0), gW(eval_w(spec, x)))
    ag[~pos] = 0.0

    # fluxes at faces i/N, shifted so the periodic sum vanishes
    S = np.concatenate(([0.0], np.cumsum(ag[:-1]) / N))
    F = S - S.mean()
    f = np.empty(N)
    f[0] = b + 0.5 * F[0] / N
    f[1:] = f[0] + np.cumsum(F[1:]) / N
    return _finish(f, ag, g, a)


def from_xspace(f, f_second, profile: CapacityProfile, compat_tol: float = 1e-3,
                g_max: float = 1e6) -> CompatibleData:
    """Validate user samples of ``f`` and ``f''`` against the capacity.

    On plateau cells ``f''`` must vanish (relative to ``max |f''|``); the
    offending plateau is reported otherwise.  ``g = f'' / a`` elsewhere.
    """
    f = np.asarray(f, dtype=float)
    fs = np.asarray(f_second, dtype=float)
    a = profile.a_values
    if f.shape != a.shape or fs.shape != a.shape:
        raise ValueError(f"expected arrays of length {a.size}")
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(fs))):
        raise ValueError("initial data must be finite")
    scale = max(float(np.max(np.abs(fs))), 1e-300)
    pos = a > 0

    for plateau in profile.plateaus:
        cells = profile.plateau_cells(plateau)
        if cells.size == 0:
            continue
        bad = cells[np.abs(fs[cells]) > compat_tol * scale]
        if bad.size:
            raise IncompatibleData(
                f"f'' does not vanish on the plateau [{plateau[0]:.6g}, "
                f"{plateau[1]:.6g}] of the atom at {plateau[2]:.6g} "
                f"(max |f''| there {np.max(np.abs(fs[cells])):.3g})",
                plateau=plateau, cells=bad)
    stray = ~pos & (np.abs(fs) > compat_tol * scale)
    if np.any(stray):
        raise IncompatibleData("f'' nonzero on cells with a = 0",
                               cells=np.flatnonzero(stray))

    g = np.where(pos, fs / np.where(pos, a, 1.0), 0.0)
    if np.max(np.abs(g)) > g_max:
        j = int(np.argmax(np.abs(g)))
        raise IncompatibleData(
            f"|g| = {abs(g[j]):.3g} at x = {profile.x[j]:.6g} exceeds g_max={g_max:g}",
            cells=np.array([j]))
    drift = a_mean(a, g)
    if abs(drift) > compat_tol * scale:
        raise IncompatibleData(f"Σ a g / N = {drift:.3e}: f' is not periodic")
    g = np.where(pos, g - drift, 0.0)
    return _finish(f, fs, g, a)


def periodic_interpolant(values):
    """Monotone piecewise-cubic interpolant of cell-centred samples, 1-periodic."""
    values = np.asarray(values)
    N = values.size
    pad = 4
    idx = np.arange(-pad, N + pad)
    xs = (idx + 0.5) / N
    interp = PchipInterpolator(xs, values[idx % N])

    def fun(x):
        x = np.asarray(x, dtype=float)
        return interp(x - np.floor(x))

    return fun


def compose_h(f, spec: MeasureSpec, y):
    """``h(y) = f(W(y))`` for grid samples ``f``; ``y`` is an int (cell centres) or points."""
    if np.isscalar(y) and float(y).is_integer() and not isinstance(y, float):
        y = cell_centers(int(y))
    return periodic_interpolant(f)(eval_W(spec, y))
