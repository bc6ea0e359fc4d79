"""Probability measures on the circle with a piecewise-constant density plus atoms.

A measure is described by a :class:`MeasureSpec`.  From it we compute the
right-continuous distribution function ``W`` (normalised by ``W(0) = 0`` and
``W(x + 1) = W(x) + 1``), its generalized inverse ``w(s) = sup{r : W(r) <= s}``
and the heat capacity ``a = w'`` averaged over a uniform grid of the image
coordinate.  An atom of mass ``c`` at ``p`` becomes an interval of length
``c`` on which ``w`` is constant (a "plateau", where ``a = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeasureSpec",
    "CapacityProfile",
    "InvalidMeasure",
    "eval_W",
    "eval_W_left",
    "eval_w",
    "capacity",
    "vague_distance",
    "substitution_check",
    "lebesgue",
    "lebesgue_plus_delta",
    "cantor_approx",
    "two_atoms",
    "gauss_panels",
    "cell_centers",
]

MASS_TOL = 1e-12


class InvalidMeasure(ValueError):
    """Raised when a measure description violates the admissibility rules."""


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Density-plus-atoms description of a probability measure on [0, 1).

    Parameters
    ----------
    breakpoints : array_like
        Increasing cell boundaries ``0 = x_0 < ... < x_M = 1``.
    densities : array_like
        ``M`` Lebesgue densities, one per cell, each at least ``delta_min``.
    atoms : sequence of (location, mass)
        Point masses at distinct locations in ``[0, 1)``.
    delta_min : float
        Lower bound on the densities.  Keeps Lebesgue measure absolutely
        continuous with respect to the measure, so that ``W`` is strictly
        increasing and ``w`` absolutely continuous.
    """

    breakpoints: np.ndarray
    densities: np.ndarray
    atoms: tuple[tuple[float, float], ...] = ()
    delta_min: float = 1e-9
    _cum: np.ndarray = field(init=False, repr=False)
    _atom_loc: np.ndarray = field(init=False, repr=False)
    _atom_cum: np.ndarray = field(init=False, repr=False)
    _s_knots: np.ndarray = field(init=False, repr=False)
    _y_knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        dens = np.asarray(self.densities, dtype=float)
        atoms = tuple(sorted((float(p), float(c)) for p, c in self.atoms))

        if bp.ndim != 1 or bp.size < 2:
            raise InvalidMeasure("need at least two breakpoints")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise InvalidMeasure("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bp) <= 0):
            raise InvalidMeasure("breakpoints must be strictly increasing")
        if dens.shape != (bp.size - 1,):
            raise InvalidMeasure(
                f"expected {bp.size - 1} densities, got {dens.size}")
        if not np.all(np.isfinite(dens)):
            raise InvalidMeasure("densities must be finite")
        if np.any(dens < self.delta_min):
            j = int(np.argmin(dens))
            raise InvalidMeasure(
                f"density {dens[j]:.3g} on cell [{bp[j]:.6g}, {bp[j + 1]:.6g}] is "
                f"below delta_min={self.delta_min:.3g}: Lebesgue measure would "
                "not be absolutely continuous w.r.t. the measure")
        locs = np.array([p for p, _ in atoms], dtype=float)
        masses = np.array([c for _, c in atoms], dtype=float)
        if locs.size:
            if np.any((locs < 0) | (locs >= 1)):
                raise InvalidMeasure("atom locations must lie in [0, 1)")
            if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
                raise InvalidMeasure("atom masses must be positive and finite")
            if np.any(np.diff(locs) == 0):
                raise InvalidMeasure("atom locations must be distinct")

        cum = np.concatenate(([0.0], np.cumsum(dens * np.diff(bp))))
        total = cum[-1] + masses.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidMeasure(f"total mass is {total!r}, expected 1")

        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "densities", dens)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_cum", cum)
        # atoms at 0 are booked at x = 1 (W(0) = 0, W(0-) = -c0)
        inner = locs > 0
        object.__setattr__(self, "_atom_loc", locs[inner])
        object.__setattr__(self, "_atom_cum",
                           np.concatenate(([0.0], np.cumsum(masses[inner]))))
        self._build_inverse()

    @property
    def atom_at_zero(self) -> float:
        """Mass of the atom at 0 (0.0 if there is none)."""
        if self.atoms and self.atoms[0][0] == 0.0:
            return self.atoms[0][1]
        return 0.0

    def _build_inverse(self):
        # knots of the piecewise-linear graph of w, s -> y
        c0 = self.atom_at_zero
        kinks = self.breakpoints[1:-1]
        kinks = kinks[~np.isin(kinks, self._atom_loc)]
        s, y = [0.0], [0.0]
        events = sorted([(b, False) for b in kinks]
                        + [(p, True) for p in self._atom_loc])
        for loc, is_atom in events:
            if is_atom:
                s.append(float(_W_base(self, np.array([loc]), left=True)[0]))
                y.append(loc)
            s.append(float(_W_base(self, np.array([loc]))[0]))
            y.append(loc)
        if c0 > 0:
            s.append(1.0 - c0)
            y.append(1.0)
        s.append(1.0)
        y.append(1.0)
        object.__setattr__(self, "_s_knots", np.array(s))
        object.__setattr__(self, "_y_knots", np.array(y))

    def to_dict(self) -> dict:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "densities": self.densities.tolist(),
            "atoms": [[p, c] for p, c in self.atoms],
        }

    def plateaus(self) -> list[tuple[float, float, float]]:
        """Image intervals ``[W(p-), W(p-) + c]`` of the atoms, as ``(start, end, p)``.

        The plateau of an atom at 0 is reported as ``[1 - c, 1]``.
        """
        out = []
        for p, c in self.atoms:
            if p == 0.0:
                out.append((1.0 - c, 1.0, 0.0))
            else:
                start = float(eval_W_left(self, p))
                out.append((start, start + c, p))
        return out


def _W_base(spec: MeasureSpec, x: np.ndarray, left: bool = False) -> np.ndarray:
    """W on [0, 1] without periodic reduction (x in (0, 1] when ``left``)."""
    cont = np.interp(x, spec.breakpoints, spec._cum)
    side = "left" if left else "right"
    idx = np.searchsorted(spec._atom_loc, x, side=side)
    return cont + spec._atom_cum[idx]


def eval_W(spec: MeasureSpec, x):
    """Right-continuous distribution function, extended by ``W(x+1) = W(x) + 1``."""
    x = np.asarray(x, dtype=float)
    n = np.floor(x)
    return n + _W_base(spec, x - n)


def eval_W_left(spec: MeasureSpec, x):
    """Left limit ``W(x-)``."""
    x = np.asarray(x, dtype=float)
    n = np.ceil(x) - 1.0
    return n + _W_base(spec, x - n, left=True)


def eval_w(spec: MeasureSpec, s):
    """Generalized inverse ``w(s) = sup{r : W(r) <= s}``, continuous and nondecreasing."""
    s = np.asarray(s, dtype=float)
    n = np.floor(s)
    return n + np.interp(s - n, spec._s_knots, spec._y_knots)


@dataclass(frozen=True, eq=False)
class CapacityProfile:
    """Cell averages of ``a = w'`` on ``N`` uniform cells of the image coordinate."""

    n_cells: int
    a_values: np.ndarray
    plateaus: list[tuple[float, float, float]]

    @property
    def x(self) -> np.ndarray:
        return cell_centers(self.n_cells)

    @property
    def plateau_mask(self) -> np.ndarray:
        """True on cells lying entirely inside a plateau."""
        return self.a_values == 0.0

    def plateau_cells(self, plateau) -> np.ndarray:
        """Indices of cells fully inside ``plateau``, in periodic order."""
        start, end, _ = plateau
        N = self.n_cells
        lo = int(np.ceil(start * N - 1e-9))
        hi = int(np.floor(end * N + 1e-9))
        return np.arange(lo, hi) % N


def cell_centers(N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) / N


def capacity(spec: MeasureSpec, N: int) -> CapacityProfile:
    """Exact cell averages ``a_j = N (w((j+1)/N) - w(j/N))``.

    Cells inside a plateau get exactly zero because ``w`` is constant there.
    """
    if N < 4:
        raise ValueError("need at least 4 cells")
    edges = eval_w(spec, np.arange(N + 1) / N)
    a = N * np.diff(edges)
    return CapacityProfile(n_cells=N, a_values=a, plateaus=spec.plateaus())


# --------------------------------------------------------------------------
# vague convergence
# --------------------------------------------------------------------------

def _kinks(spec: MeasureSpec) -> np.ndarray:
    return np.concatenate((spec.breakpoints, [p for p, _ in spec.atoms]))


def _levy_ok(spec1, spec2, eps, base, kinks1, tol=1e-14) -> bool:
    x = np.concatenate((base, kinks1 - eps, kinks1 + eps))
    x = x - np.floor(x)
    G, Gl = eval_W(spec2, x), eval_W_left(spec2, x)
    lo, lol = eval_W(spec1, x - eps) - eps, eval_W_left(spec1, x - eps) - eps
    hi, hil = eval_W(spec1, x + eps) + eps, eval_W_left(spec1, x + eps) + eps
    return bool(np.all(lo <= G + tol) and np.all(lol <= Gl + tol)
                and np.all(G <= hi + tol) and np.all(Gl <= hil + tol))


def vague_distance(spec1: MeasureSpec, spec2: MeasureSpec,
                   grid: int = 4097, iters: int = 60) -> float:
    """Lévy distance between the periodically extended distribution functions.

    Both functions are piecewise linear with jumps, so checking the Lévy
    inequalities at the grid, the kinks of ``spec2`` and the kinks of
    ``spec1`` shifted by ``±eps`` (values and left limits) is exact.  The
    infimum over ``eps`` is found by bisection.
    """
    base = np.concatenate((np.linspace(0.0, 1.0, grid), _kinks(spec2)))
    kinks1 = _kinks(spec1)
    if _levy_ok(spec1, spec2, 0.0, base, kinks1):
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _levy_ok(spec1, spec2, mid, base, kinks1):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# substitution rules
# --------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def gauss_panels(edges, n_panels: int = 4096):
    """Composite 8-point Gauss nodes/weights on the pieces delimited by ``edges``.

    Roughly ``n_panels`` panels are spread over ``[edges[0], edges[-1]]`` in
    proportion to piece length, at least one per piece.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    lengths = np.diff(edges)
    keep = lengths > 0
    left, lengths = edges[:-1][keep], lengths[keep]
    counts = np.maximum(1, np.ceil(n_panels * lengths / lengths.sum())).astype(int)
    starts = np.concatenate([l + h / k * np.arange(k)
                             for l, h, k in zip(left, lengths, counts)])
    widths = np.repeat(lengths / counts, counts)
    mid = starts + 0.5 * widths
    nodes = (mid[:, None] + 0.5 * widths[:, None] * _GL_X[None, :]).ravel()
    weights = (0.5 * widths[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def substitution_check(spec: MeasureSpec, h, n_panels: int = 2 ** 12) -> dict:
    """Both sides of the two change-of-variables identities, by quadrature.

    ``h`` is a vectorised 1-periodic callable.  Returns a dict with keys
    ``"dW"`` for ``∫_(0,1] h dW = ∫_0^1 h(w(x)) dx`` and ``"a"`` for
    ``∫ a(x) h(x) dx = ∫ h(W(y)) dy``, each a ``(lhs, rhs)`` pair.
    """
    y_edges = np.concatenate((spec.breakpoints, [p for p, _ in spec.atoms]))
    yn, yw = gauss_panels(y_edges, n_panels)
    cell = np.clip(np.searchsorted(spec.breakpoints, yn, side="right") - 1,
                   0, spec.densities.size - 1)
    atom_part = sum(c * h(np.asarray(p)) for p, c in spec.atoms)
    lhs_dw = float(np.sum(yw * spec.densities[cell] * h(yn)) + atom_part)

    xn, xw = gauss_panels(spec._s_knots, n_panels)
    rhs_dw = float(np.sum(xw * h(eval_w(spec, xn))))

    slopes = np.diff(spec._y_knots) / np.diff(spec._s_knots)
    seg = np.clip(np.searchsorted(spec._s_knots, xn, side="right") - 1,
                  0, slopes.size - 1)
    lhs_a = float(np.sum(xw * slopes[seg] * h(xn)))
    rhs_a = float(np.sum(yw * h(eval_W(spec, yn))))
    return {"dW": (lhs_dw, rhs_dw), "a": (lhs_a, rhs_a)}


# --------------------------------------------------------------------------
# canned measures
# --------------------------------------------------------------------------

def lebesgue() -> MeasureSpec:
    return MeasureSpec([0.0, 1.0], [1.0])


def lebesgue_plus_delta(p: float, c: float) -> MeasureSpec:
    """``(1 - c) L + c δ_p``."""
    return MeasureSpec([0.0, 1.0], [1.0 - c], atoms=((p, c),))


def two_atoms(n: int) -> MeasureSpec:
    """``½ L + ¼ δ_{½ - 1/n} + ¼ δ_{½ + 1/n}``; tends to ``½ L + ½ δ_½`` as n grows."""
    if n <= 2:
        raise ValueError("n must exceed 2 so both atoms lie in (0, 1)")
    return MeasureSpec([0.0, 1.0], [0.5],
                       atoms=((0.5 - 1.0 / n, 0.25), (0.5 + 1.0 / n, 0.25)))


def cantor_approx(n: int) -> MeasureSpec:
    """Measure of ``W_n(x) = x/2 + C_n(x)/2`` with ``C_n`` the n-th linear Cantor approximant.

    ``C_n`` rises with slope ``(3/2)^n`` on each of the ``2^n`` kept triadic
    intervals of length ``3^-n`` and is flat on the removed ones.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    left = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        left = np.concatenate((3 * left, 3 * left + 2))
    left = np.sort(left)
    scale = 3 ** n
    starts = left / scale
    ends = (left + 1) / scale
    bp = np.unique(np.concatenate((starts, ends, [0.0, 1.0])))
    mids = 0.5 * (bp[:-1] + bp[1:])
    idx = np.searchsorted(starts, mids, side="right") - 1
    kept = mids < ends[idx]
    dens = np.where(kept, 0.5 + 0.5 * 1.5 ** n, 0.5)
    # cell lengths carry rounding; rescale so the total mass is 1
    mass = np.sum(dens * np.diff(bp))
    dens = dens / mass
    return MeasureSpec(bp, dens)
