from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhnlab import semigroup as sg
from fhnlab.model import FieldPair, Grid, tile
from fhnlab.modulation import synthesize_perturbation


@pytest.fixture(scope="module")
def window(wave, curve, coeffs):
    return sg.bloch_window(wave, curve, 64, coeffs.c_g_fit)


@given(st.floats(0, 1))
def test_chi_vanishes_before_one(t):
    assert sg.chi_derivatives(t, 3).tolist() == [0.0] * 4


@given(st.floats(2, 1e4))
def test_chi_is_one_after_two(t):
    assert sg.chi_derivatives(t, 3).tolist() == [1.0, 0.0, 0.0, 0.0]


@given(st.floats(1.05, 1.95))
@settings(max_examples=30)
def test_chi_derivative_matches_difference(t):
    h = 1e-6
    d = sg.chi_derivatives(t, 2)
    assert 0 <= d[0] <= 1
    fd = (sg.chi_derivatives(t + h)[0] - sg.chi_derivatives(t - h)[0]) / (2 * h)
    assert d[1] == pytest.approx(fd, rel=1e-5, abs=1e-8)
    fd2 = (sg.chi_derivatives(t + h, 1)[1] - sg.chi_derivatives(t - h, 1)[1]) / (2 * h)
    assert d[2] == pytest.approx(fd2, rel=1e-4, abs=1e-6)


def test_rho_plateau_and_support():
    xi0 = 0.01
    assert np.all(sg.rho(np.linspace(-xi0 / 2, xi0 / 2, 11), xi0) == 1.0)
    assert np.all(sg.rho(np.array([-xi0, xi0, 2 * xi0]), xi0) == 0.0)


def test_translational_kernel_is_preserved(wave):
    cells = 2
    d = wave.derivative(1)
    g = FieldPair(tile(d.u, cells), tile(d.v, cells))
    _, out = sg.linear_evolve(wave, g, 10.0, 0.05, cells, times=[0.0, 10.0])
    assert (out[-1] - g).sup_norm() < 1e-8 * g.sup_norm()


def test_bloch_mode_evolves_by_its_eigenvalue(window):
    m = int(np.argmax(np.abs(window.xi)))
    ph, _ = window._tiled(m)
    t = 5.0
    _, out = sg.linear_evolve(window.wave, ph, t, 0.05, window.cells, times=[0.0, t])
    expect = ph * np.exp(window.lam[m] * t)
    assert (out[-1] - expect).sup_norm() < 1e-7 * ph.sup_norm()


def test_evolution_commutes_with_cell_shift(wave, rng):
    cells = 2
    n = wave.n
    g = FieldPair(rng.normal(size=cells * n), rng.normal(size=cells * n)) * 0.1
    gs = FieldPair(np.roll(g.u, n), np.roll(g.v, n))
    _, a = sg.linear_evolve(wave, g, 2.0, 0.05, cells, times=[2.0])
    _, b = sg.linear_evolve(wave, gs, 2.0, 0.05, cells, times=[2.0])
    shifted = FieldPair(np.roll(a[0].u, n), np.roll(a[0].v, n))
    assert (shifted - b[0]).sup_norm() < 1e-12


def test_stiff_step_rejected(wave):
    g = FieldPair(np.zeros(wave.n), np.zeros(wave.n))
    with pytest.raises(sg.StiffnessError):
        sg.linear_evolve(wave, g, 10.0, 5.0, 1)


def test_window_contains_enough_modes(window):
    assert len(window.xi) >= 8
    assert np.any(window.xi == 0)
    assert np.all(np.abs(window.xi) < window.xi0)


def test_short_domain_rejected(wave, curve, coeffs):
    with pytest.raises(sg.DomainTooShort):
        sg.bloch_window(wave, curve, 4, coeffs.c_g_fit)


def test_principal_part_vanishes_for_small_times(window):
    g = synthesize_perturbation("random-bounded", 1.0, 3, window.grid)
    for t in (0.0, 0.5, 1.0):
        assert np.max(np.abs(sg.sp_apply(window, g, t))) == 0.0


def test_decomposition_reassembles(window, family):
    g = synthesize_perturbation("random-bounded", 1.0, 3, window.grid)
    for s in sg.semigroup_decompose(window, family, g, [0.5, 3.0, 10.0]):
        assert s.reassembly_defect() < 1e-12


def test_transport_derivative_uses_chi_derivative(window):
    g = synthesize_perturbation("random-bounded", 1.0, 3, window.grid)
    t, h = 1.5, 1e-4
    W = window.weights(g)
    # (d_t + c_g d_z) S_p by differences in t plus c_g d_z
    dt = (sg.sp_apply(window, g, t + h, weights=W) - sg.sp_apply(window, g, t - h, weights=W)) / (2 * h)
    expect = dt + window.c_g * sg.sp_apply(window, g, t, 0, 1, W)
    got = sg.sp_apply(window, g, t, 1, 0, W)
    assert np.max(np.abs(got - expect)) < 1e-6 * max(1e-12, np.max(np.abs(got)))


def test_heat_propagate_single_mode():
    N, L = 128, 50.0
    x = np.arange(N) * L / N
    k = 2 * np.pi * 3 / L
    g = np.cos(k * x)
    d, c, t = 0.3, 0.7, 2.0
    expect = np.exp(-d * k**2 * t) * np.cos(k * (x - c * t))
    assert np.allclose(sg.heat_propagate(g, t, d, c, 0, L), expect, atol=1e-13)
    dexp = -k * np.exp(-d * k**2 * t) * np.sin(k * (x - c * t))
    assert np.allclose(sg.heat_propagate(g, t, d, c, 1, L), dexp, atol=1e-13)


def test_heat_propagate_needs_positive_diffusion():
    with pytest.raises(ValueError):
        sg.heat_propagate(np.ones(8), 1.0, 0.0, 0.0)


@pytest.mark.parametrize("p", [-0.5, -1.0, -1.5])
def test_fit_decay_recovers_power_law(p):
    t = np.geomspace(10, 1000, 20)
    fit = sg.fit_decay(t, 3.0 * t**p, "power")
    assert fit.fitted_exponent == pytest.approx(p, abs=1e-10)
    assert not fit.poor_fit


def test_fit_decay_power_log_and_exponential():
    t = np.geomspace(10, 1000, 20)
    fit = sg.fit_decay(t, np.log(2 + t) / (1 + t), "power-log")
    assert fit.fitted_exponent == pytest.approx(-1.0, abs=1e-10)
    fit = sg.fit_decay(t, np.exp(-0.01 * t), "exponential")
    assert fit.rate == pytest.approx(0.01, rel=1e-10)


def test_fit_decay_flags_bad_fit_and_input():
    t = np.geomspace(10, 1000, 20)
    y = t**-0.5 * (1 + 0.5 * np.sin(t))
    assert sg.fit_decay(t, y).poor_fit
    with pytest.raises(ValueError):
        sg.fit_decay(t[:5], y[:5])
    with pytest.raises(ValueError):
        sg.fit_decay(t, -y)
