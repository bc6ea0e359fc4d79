import numpy as np
import pytest
from hypothesis import given, strategies as st

from genheat.initial_data import (IncompatibleData, NonZeroMean, a_mean, compose_h,
                                  from_xspace, from_yspace, periodic_interpolant,
                                  seminorm_a)
from genheat.measure import capacity, cell_centers, lebesgue, lebesgue_plus_delta

from .conftest import cos_y
from .strategies import measures


def d2(u):
    N = u.size
    return N * N * (np.roll(u, -1) - 2 * u + np.roll(u, 1))


def test_lebesgue_cosine_closed_form():
    # f'' = cos(2 pi x) gives f = (1 - cos(2 pi x)) / (4 pi^2) with f(0) = 0
    N = 256
    data = from_yspace(cos_y, 0.0, lebesgue(), N)
    x = cell_centers(N)
    exact = (1 - np.cos(2 * np.pi * x)) / (4 * np.pi ** 2)
    np.testing.assert_allclose(data.f, exact, atol=2e-6)
    assert data.mean == pytest.approx(1 / (4 * np.pi ** 2), abs=2e-6)


def test_one_atom_data_affine_on_plateau(one_atom):
    spec, prof, data = one_atom
    cells = prof.plateau_cells(prof.plateaus[0])
    np.testing.assert_allclose(d2(data.f)[cells], 0.0, atol=1e-9)
    assert np.all(data.f_second[cells] == 0.0)
    assert data.compatibility_defect() < 1e-9


def test_centering(one_atom):
    _, prof, data = one_atom
    assert a_mean(prof.a_values, data.centered_f) == pytest.approx(0.0, abs=1e-15)
    assert a_mean(prof.a_values, data.g) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(data.f - data.centered_f, data.mean)


def test_nonzero_mean_rejected():
    with pytest.raises(NonZeroMean):
        from_yspace(lambda y: 1.0 + np.cos(2 * np.pi * y), 0.0, lebesgue(), 64)


def test_xspace_accepts_compatible_data():
    prof = capacity(lebesgue(), 128)
    x = prof.x
    data = from_xspace(np.cos(2 * np.pi * x), -4 * np.pi ** 2 * np.cos(2 * np.pi * x), prof)
    np.testing.assert_allclose(data.g, -4 * np.pi ** 2 * np.cos(2 * np.pi * x), atol=1e-9)


def test_xspace_rejects_curvature_on_plateau():
    prof = capacity(lebesgue_plus_delta(0.5, 0.5), 128)
    x = prof.x
    with pytest.raises(IncompatibleData, match="plateau") as info:
        from_xspace(np.sin(2 * np.pi * x), -4 * np.pi ** 2 * np.sin(2 * np.pi * x), prof)
    assert info.value.plateau == (0.25, 0.75, 0.5)
    assert info.value.cells.size > 0


def test_xspace_rejects_large_g():
    prof = capacity(lebesgue(), 64)
    fs = np.zeros(64)
    fs[3], fs[4] = 1e7, -1e7
    with pytest.raises(IncompatibleData, match="g_max"):
        from_xspace(np.zeros(64), fs, prof)


def test_xspace_shape_mismatch():
    prof = capacity(lebesgue(), 64)
    with pytest.raises(ValueError):
        from_xspace(np.zeros(63), np.zeros(64), prof)


def test_samples_as_input():
    N = 128
    y = cell_centers(1024)
    d1 = from_yspace(cos_y, 0.0, lebesgue_plus_delta(0.5, 0.5), N)
    d2_ = from_yspace(np.cos(2 * np.pi * y), 0.0, lebesgue_plus_delta(0.5, 0.5), N)
    np.testing.assert_allclose(d1.f, d2_.f, atol=1e-5)


def test_compose_h_jumps_at_atom():
    spec = lebesgue_plus_delta(0.5, 0.5)
    N = 512
    x = cell_centers(N)
    f = np.sin(2 * np.pi * x)
    h = compose_h(f, spec, np.array([0.5 - 1e-9, 0.5]))
    # W jumps from 1/4 to 3/4 at the atom
    assert h[0] == pytest.approx(1.0, abs=1e-4)
    assert h[1] == pytest.approx(-1.0, abs=1e-4)


def test_periodic_interpolant_reproduces_samples():
    v = np.random.default_rng(0).standard_normal(32)
    interp = periodic_interpolant(v)
    np.testing.assert_allclose(interp(cell_centers(32)), v, atol=1e-14)
    np.testing.assert_allclose(interp(cell_centers(32) + 1.0), v, atol=1e-14)


@given(measures(), st.floats(-2.0, 2.0), st.integers(1, 3))
def test_yspace_data_properties(spec, b, mode):
    N = 128
    prof = capacity(spec, N)
    data = from_yspace(lambda y: np.sin(2 * np.pi * mode * y + 0.3), b, spec, N, profile=prof)
    a = prof.a_values
    # second difference equals a g; zero where a = 0
    np.testing.assert_allclose(d2(data.f), data.f_second, atol=1e-8 * max(1.0, np.abs(data.f_second).max()))
    np.testing.assert_allclose(data.f_second, a * data.g, atol=1e-9)
    assert np.all(data.f_second[a == 0] == 0.0)
    assert a_mean(a, data.centered_f) == pytest.approx(0.0, abs=1e-12)
    assert seminorm_a(a, data.centered_f) >= 0
