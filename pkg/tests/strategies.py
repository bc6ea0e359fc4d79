"""Hypothesis strategies for admissible measures."""

import numpy as np
from hypothesis import strategies as st

from genheat.measure import MeasureSpec


@st.composite
def measures(draw, max_cells=4, max_atoms=3, min_density=0.2):
    m = draw(st.integers(1, max_cells))
    inner = draw(st.lists(st.floats(0.05, 0.95), min_size=m - 1, max_size=m - 1,
                          unique=True))
    bp = np.concatenate(([0.0], np.sort(inner), [1.0]))
    if np.any(np.diff(bp) < 0.02):
        bp = np.linspace(0.0, 1.0, m + 1)
    raw = np.array(draw(st.lists(st.floats(min_density, 3.0), min_size=m, max_size=m)))
    n_atoms = draw(st.integers(0, max_atoms))
    locs = draw(st.lists(st.integers(0, 99), min_size=n_atoms, max_size=n_atoms,
                         unique=True))
    masses = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=n_atoms,
                                    max_size=n_atoms)))
    total = float(np.sum(raw * np.diff(bp)) + masses.sum())
    dens = raw / total
    atoms = tuple((l / 100.0, c / total) for l, c in zip(locs, masses))
    # fix rounding of the total mass on the first cell
    excess = float(np.sum(dens * np.diff(bp)) + sum(c for _, c in atoms)) - 1.0
    dens[0] -= excess / bp[1]
    return MeasureSpec(bp, dens, atoms=atoms)
