"""Back to the time domain.

With the transform pair ``F[v](xi) = ∫ v(t) e^{-i xi t} dt`` and
``v(t) = (1/2π) ∫ F[v](xi) e^{i xi t} dxi`` one has
``F[H(t) e^{-t}] = 1 / (1 + i xi)``, hence

    v(t, x) = (1/π) Re ∫_0^∞ k(xi, x) e^{i xi t} dxi + f_c(x) e^{-t} + mean

using ``k(-xi) = conj k(xi)``.  The integral over ``[0, Xi]`` is done with a
Filon rule: ``k`` is interpolated linearly between frequency nodes and the
product with ``e^{i xi t}`` is integrated exactly, so the rule stays accurate
for any ``t`` however oscillatory the integrand.

On a uniform grid of spacing ``h`` the linear interpolant acts on the time
signal as multiplication by the hat-kernel response ``sinc^2(h t / 2)``
(aliases sit at ``t ± 2π/h``, and ``v`` vanishes for negative times).  The
weights are divided by that factor, which removes the ``O(h^2 t^2)`` bias of
the plain rule; this needs ``h t <= π``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import factorial

import numpy as np

from .initial_data import CompatibleData, periodic_interpolant
from .measure import MeasureSpec, cell_centers, eval_W
from .resolvent import ResolventFamily, decay_report

__all__ = [
    "SolutionField",
    "TailBoundExceeded",
    "filon_weights",
    "synthesize",
    "pushback",
    "holder_seminorm",
    "write_field_csv",
]


class TailBoundExceeded(ValueError):
    """The truncation at ``Xi`` cannot meet the requested tolerance."""


@dataclass(frozen=True, eq=False)
class SolutionField:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray  # (n_times, N)
    mean: float
    a: np.ndarray
    backend: str = "spectral"
    tail_bound: float | None = None

    def a_means(self) -> np.ndarray:
        """``Σ_j a_j v(t_i, x_j) / N`` for every sample time."""
        return self.v @ self.a / self.a.size

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[i], t, rtol=0, atol=1e-12):
            raise KeyError(f"time {t} not sampled")
        return self.v[i]


_N_SERIES = 24
_COEF_A = np.array([1.0 / (factorial(n) * (n + 1) * (n + 2)) for n in range(_N_SERIES)])
_COEF_B = np.array([1.0 / (factorial(n) * (n + 2)) for n in range(_N_SERIES)])


def _panel_moments(theta):
    """``A = ∫_0^1 (1-s) e^{iθs} ds`` and ``B = ∫_0^1 s e^{iθs} ds``."""
    theta = np.asarray(theta, dtype=float)
    A = np.empty(theta.shape, dtype=complex)
    B = np.empty(theta.shape, dtype=complex)
    small = np.abs(theta) < 1.0
    if small.any():
        powers = (1j * theta[small])[..., None] ** np.arange(_N_SERIES)
        A[small] = powers @ _COEF_A
        B[small] = powers @ _COEF_B
    big = ~small
    if big.any():
        th = theta[big]
        e = np.exp(1j * th)
        B[big] = e / (1j * th) + (e - 1.0) / th ** 2
        A[big] = (e - 1.0) / (1j * th) - B[big]
    return A, B


def filon_weights(xi, t, deconvolve: bool = True):
    """Weights ``ω`` with ``∫_{xi_0}^{xi_M} L(ξ) e^{iξt} dξ = Σ_m ω_m k_m``.

    ``L`` is the piecewise-linear interpolant of samples ``k_m`` on the uniform
    grid ``xi``.  With ``deconvolve`` the weights are divided by
    ``sinc^2(h t / 2)``.  Returns an array of shape ``(len(t), len(xi))``.
    """
    xi = np.asarray(xi, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if xi.size == 1:
        return np.zeros((t.size, 1), dtype=complex)
    h = xi[1] - xi[0]
    theta = h * t
    A, B = _panel_moments(theta)
    phase = np.exp(1j * np.outer(t, xi))
    w = np.zeros((t.size, xi.size), dtype=complex)
    w[:, :-1] += A[:, None]
    w[:, 1:] += (np.exp(-1j * theta) * B)[:, None]
    w *= h * phase
    if deconvolve:
        if np.any(np.abs(theta) > np.pi):
            raise ValueError(
                f"frequency spacing {h:g} too coarse for t = {np.max(np.abs(t)):g}; "
                "need spacing * t <= pi")
        half = 0.5 * theta
        safe = np.where(half == 0, 1.0, half)
        response = np.where(half == 0, 1.0, (np.sin(safe) / safe) ** 2)
        w /= response[:, None]
    return w


def synthesize(family: ResolventFamily, data: CompatibleData, times,
               tol: float | None = None, workers: int = 1,
               chunk: int = 64) -> SolutionField:
    """Evaluate ``v(t_i, x_j)`` from a solved resolvent family.

    The reported ``tail_bound`` is ``2 C [f+g]_a / (π sqrt(Xi))`` with ``C``
    the fitted decay constant of ``|xi|^{3/2} sup|k|``; ``TailBoundExceeded``
    is raised when ``tol`` is below it.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    xi = family.xi
    rep = decay_report(family)
    xi_max = xi[-1]
    tail = 2.0 * rep.c_hat * rep.seminorm / (np.pi * np.sqrt(xi_max)) if xi_max > 0 else np.inf
    if tol is not None and tol < tail:
        raise TailBoundExceeded(
            f"tail bound {tail:.3e} exceeds requested tolerance {tol:.3e}; raise xi_max")

    # contiguous copies keep the products on the BLAS path
    kr = np.ascontiguousarray(family.k.real)
    ki = np.ascontiguousarray(family.k.imag)
    blocks = [slice(i, min(i + chunk, times.size)) for i in range(0, times.size, chunk)]

    def run(sl):
        w = filon_weights(xi, times[sl])
        return (np.ascontiguousarray(w.real) @ kr - np.ascontiguousarray(w.imag) @ ki) / np.pi

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(sl) for sl in blocks]
    integral = np.concatenate(parts, axis=0) if parts else np.empty((0, data.n_cells))
    v = integral + np.exp(-times)[:, None] * data.centered_f[None, :] + data.mean
    return SolutionField(times=times, x=cell_centers(data.n_cells), v=v,
                         mean=data.mean, a=data.a, backend="spectral",
                         tail_bound=float(tail))


def pushback(sol: SolutionField, spec: MeasureSpec, y) -> np.ndarray:
    """``rho(t_i, y) = v(t_i, W(y))``; ``y`` is a resolution or an array of points."""
    if np.isscalar(y):
        y = cell_centers(int(y))
    xw = eval_W(spec, np.asarray(y, dtype=float))
    return np.array([periodic_interpolant(row)(xw) for row in sol.v])


def holder_seminorm(times, trace, eps: float = 0.1) -> float:
    """``max |v(t) - v(s)| / |t - s|^{1/2 - eps}`` over all sample pairs."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    t = np.asarray(times, dtype=float)
    v = np.asarray(trace, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples")
    i, j = np.triu_indices(t.size, k=1)
    dt = np.abs(t[i] - t[j])
    keep = dt > 0
    return float(np.max(np.abs(v[i] - v[j])[keep] / dt[keep] ** (0.5 - eps)))


def write_field_csv(path, times, xs, values, names=("t", "x", "v")):
    """Long-format ``t,x,value`` table with a header line."""
    times = np.asarray(times, dtype=float)
    xs = np.asarray(xs, dtype=float)
    rows = np.column_stack((np.repeat(times, xs.size), np.tile(xs, times.size),
                            np.asarray(values, dtype=float).ravel()))
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=",".join(names),
               comments="")
