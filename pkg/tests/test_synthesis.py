import numpy as np
import pytest
from scipy.integrate import quad

from genheat.initial_data import from_xspace
from genheat.measure import capacity, cell_centers, lebesgue, lebesgue_plus_delta
from genheat.resolvent import FrequencyGrid, sweep
from genheat.synthesis import (SolutionField, TailBoundExceeded, filon_weights,
                               holder_seminorm, pushback, synthesize, write_field_csv)


def test_plain_weights_exact_for_linear_samples():
    xi = np.linspace(0.0, 40.0, 81)
    for t in (0.0, 0.3, 5.0, 50.0):
        w = filon_weights(xi, t, deconvolve=False)[0]
        approx = w @ (1 + 2 * xi)
        re = quad(lambda s: (1 + 2 * s) * np.cos(s * t), 0, 40, limit=400)[0]
        im = quad(lambda s: (1 + 2 * s) * np.sin(s * t), 0, 40, limit=400)[0]
        assert approx == pytest.approx(re + 1j * im, abs=1e-8 * max(1, abs(re + 1j * im)))


def test_weights_small_angle_series_continuous():
    xi = np.linspace(0.0, 1.0, 3)
    below = filon_weights(xi, 1.999999, deconvolve=False)
    above = filon_weights(xi, 2.000001, deconvolve=False)
    np.testing.assert_allclose(below, above, atol=1e-6)


def test_deconvolved_rule_inverts_causal_transform():
    # (1/pi) Re int_0^inf e^{i xi t} / (1 + i xi)^2 dxi = t e^{-t} for t > 0
    xi = FrequencyGrid(4096.0, 8192).xi_values
    k = 1.0 / (1.0 + 1j * xi) ** 2
    t = np.array([0.05, 0.5, 1.0, 2.0, 4.0, 6.0])
    deconv = (filon_weights(xi, t) @ k).real / np.pi
    plain = (filon_weights(xi, t, deconvolve=False) @ k).real / np.pi
    exact = t * np.exp(-t)
    # the truncated tail is bounded by 1 / (pi Xi)
    assert np.max(np.abs(deconv - exact)) <= 1.0 / (np.pi * 4096.0)
    assert np.max(np.abs(plain - exact)) > 10 * np.max(np.abs(deconv - exact))


def test_deconvolution_needs_fine_grid():
    with pytest.raises(ValueError, match="spacing"):
        filon_weights(np.linspace(0.0, 10.0, 11), 4.0)


def test_constant_data_is_stationary():
    prof = capacity(lebesgue_plus_delta(0.5, 0.5), 128)
    data = from_xspace(np.full(128, 0.7), np.zeros(128), prof)
    fam = sweep(FrequencyGrid(512.0, 1024), prof, data)
    sol = synthesize(fam, data, [0.0, 0.1, 1.0])
    np.testing.assert_allclose(sol.v, 0.7, atol=1e-15)


@pytest.fixture(scope="module")
def lebesgue_solution():
    spec = lebesgue()
    prof = capacity(spec, 512)
    x = prof.x
    data = from_xspace(np.cos(2 * np.pi * x), -4 * np.pi ** 2 * np.cos(2 * np.pi * x), prof)
    fam = sweep(FrequencyGrid(), prof, data)
    return fam, data, x


def test_lebesgue_cosine_decay(lebesgue_solution):
    fam, data, x = lebesgue_solution
    times = np.array([0.0, 0.01, 0.05, 0.2, 1.0])
    sol = synthesize(fam, data, times)
    exact = np.exp(-4 * np.pi ** 2 * times)[:, None] * np.cos(2 * np.pi * x)
    # t = 0 carries the truncation tail, later times the grid error
    assert np.max(np.abs(sol.v[0] - exact[0])) < 1e-2
    assert np.max(np.abs(sol.v[1:] - exact[1:])) < 1e-4
    # peak at t = 0.05 is e^{-0.2 pi^2} = 0.13897
    assert sol.at(0.05).max() == pytest.approx(0.13897, abs=1e-4)
    assert sol.tail_bound > 0


def test_long_time_limit_is_mean(lebesgue_solution):
    fam, data, _ = lebesgue_solution
    sol = synthesize(fam, data, [2.0, 6.0])
    np.testing.assert_allclose(sol.v, sol.mean, atol=1e-4)


def test_tail_bound_guard(lebesgue_solution):
    fam, data, _ = lebesgue_solution
    with pytest.raises(TailBoundExceeded, match="xi_max"):
        synthesize(fam, data, [0.1], tol=1e-8)


def test_workers_do_not_change_result(lebesgue_solution):
    fam, data, _ = lebesgue_solution
    times = np.linspace(0.0, 1.0, 150)
    a = synthesize(fam, data, times, workers=1)
    b = synthesize(fam, data, times, workers=4)
    assert a.v.tobytes() == b.v.tobytes()


def test_negative_times_rejected(lebesgue_solution):
    fam, data, _ = lebesgue_solution
    with pytest.raises(ValueError):
        synthesize(fam, data, [-0.1])


def test_pushback_jumps_across_atom():
    spec = lebesgue_plus_delta(0.5, 0.5)
    N = 256
    x = cell_centers(N)
    v = np.sin(2 * np.pi * x)[None, :]
    sol = SolutionField(np.array([0.0]), x, v, 0.0, capacity(spec, N).a_values)
    rho = pushback(sol, spec, np.array([0.5 - 1e-9, 0.5]))
    assert rho[0, 0] == pytest.approx(1.0, abs=1e-4)   # W(1/2-) = 1/4
    assert rho[0, 1] == pytest.approx(-1.0, abs=1e-4)  # W(1/2) = 3/4
    assert pushback(sol, spec, 64).shape == (1, 64)


def test_holder_seminorm_values():
    t = np.linspace(0.0, 1.0, 11)
    assert holder_seminorm(t, np.zeros(11)) == 0.0
    # Lipschitz trace: |t - s|^{0.6} is largest for the widest pair
    assert holder_seminorm(t, t) == pytest.approx(1.0)
    # sqrt against exponent 0.4: the pairs (0, s) give s^{0.1}, largest at s = 1
    assert holder_seminorm(t, np.sqrt(t)) == pytest.approx(1.0, rel=1e-12)
    # t^{0.4} saturates the exponent on every pair through 0
    assert holder_seminorm(t, t ** 0.4) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        holder_seminorm(t, t, eps=0.5)
    with pytest.raises(ValueError):
        holder_seminorm(t[:1], t[:1])


def test_field_csv(tmp_path):
    path = tmp_path / "v.csv"
    write_field_csv(path, [0.0, 1.0], [0.25, 0.75], np.array([[1.0, 2.0], [3.0, 4.0]]))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,v"
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows, [[0, 0.25, 1], [0, 0.75, 2], [1, 0.25, 3], [1, 0.75, 4]])


def test_at_unsampled_time():
    sol = SolutionField(np.array([0.0, 1.0]), np.zeros(4), np.zeros((2, 4)), 0.0, np.ones(4))
    with pytest.raises(KeyError):
        sol.at(0.5)
