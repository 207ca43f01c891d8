from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings, strategies as st

from fhnlab import modulation as mod, semigroup as sg
from fhnlab.model import FieldPair, Grid, shift_periodic, tile

CELLS = 64


@pytest.fixture(scope="module")
def window(wave, curve, coeffs):
    return sg.bloch_window(wave, curve, CELLS, coeffs.c_g_fit)


@pytest.fixture(scope="module")
def short_run(wave, window):
    grid = window.grid
    w0 = mod.synthesize_perturbation("random-bounded", 1e-3, 1, grid, mod.component_ratio(wave))
    traj = mod.simulate_nonlinear(wave, w0, 20.0, 0.05, 10)
    return traj, mod.extract_phase(traj, window)


@pytest.mark.parametrize("kind", mod.KINDS)
def test_synthesized_perturbation_norm_and_determinism(kind):
    grid = Grid(128, 60.0, 8)
    a = mod.synthesize_perturbation(kind, 0.01, 4, grid)
    b = mod.synthesize_perturbation(kind, 0.01, 4, grid)
    assert a.sup_norm() == pytest.approx(0.01, rel=1e-12)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    assert np.isrealobj(a.u)


def test_synthesize_guards():
    grid = Grid(128, 60.0, 2)
    with pytest.raises(ValueError):
        mod.synthesize_perturbation("random-bounded", 0.0, 1, grid)
    with pytest.raises(ValueError):
        mod.synthesize_perturbation("white-noise", 0.1, 1, grid)
    with pytest.raises(ValueError):
        mod.synthesize_perturbation("random-bounded", 0.1, 1, grid, v_weight=-1)


def test_wave_is_equilibrium_of_nonlinear_run(wave):
    zero = FieldPair(np.zeros(2 * wave.n), np.zeros(2 * wave.n))
    traj = mod.simulate_nonlinear(wave, zero, 10.0, 0.05, 20)
    assert traj.stable
    assert np.max(traj.deviation_norms()) < 1e-9


def test_translated_wave_stays_translated(wave):
    cells = 2
    L = cells * wave.period
    base = FieldPair(tile(wave.profile.u, cells), tile(wave.profile.v, cells))
    moved = FieldPair(shift_periodic(base.u, L, 0.7), shift_periodic(base.v, L, 0.7))
    traj = mod.simulate_nonlinear(wave, moved - base, 10.0, 0.05, 20)
    assert (traj.fields[-1] - moved).sup_norm() < 1e-8


def test_guard_rejects_large_data(wave):
    big = FieldPair(np.ones(wave.n), np.zeros(wave.n))
    with pytest.raises(ValueError):
        mod.simulate_nonlinear(wave, big, 1.0)


def test_zero_perturbation_gives_zero_phase(wave, window):
    zero = FieldPair(np.zeros(window.grid.size), np.zeros(window.grid.size))
    traj = mod.simulate_nonlinear(wave, zero, 5.0, 0.05, 10)
    m = mod.extract_phase(traj, window)
    assert np.max(np.abs(m.amplitudes)) < 1e-14 and np.max(np.abs(m.amplitudes_t)) < 1e-14


def test_phase_extraction_converges_and_solves_integral_equation(short_run):
    traj, m = short_run
    assert m.converged
    res = mod.integral_equation_residual(traj, m, [5, 10, 20])
    assert np.max(res) < 1e-7


def test_phase_vanishes_before_cutoff(short_run):
    traj, m = short_run
    i = traj.index(1.0)
    assert np.max(np.abs(m.psi[: i + 1])) == 0.0


def test_zero_phase_collapses_modulated_perturbations(short_run, family):
    traj, m = short_run
    zero = mod.PhaseModulation(m.times, np.zeros_like(m.amplitudes), np.zeros_like(m.amplitudes_t),
                               m.window, 0, True)
    f = mod.modulated_fields(traj, zero, family, len(traj.times) - 1)
    for name in ("w", "z", "w_fwd", "z_fwd"):
        assert (f[name] - f["unmodulated"]).sup_norm() < 1e-10


def test_forward_residual_needs_neighbours(short_run, family):
    traj, m = short_run
    with pytest.raises(mod.SnapshotDensityError):
        mod.forward_residual_check(traj, m, family, float(traj.times[-1]))


def test_forward_equation_residual_small(short_run, family):
    traj, m = short_run
    assert mod.forward_residual_check(traj, m, family, 10.0) < 5e-2


def test_interpolation_coefficient_value():
    a1, a2, a3 = mod.interpolation_coefficients(0.1)
    assert float(a3) == pytest.approx(4 * (5 + 0.04 + 0.4) / (3 * 0.6), rel=1e-14)
    assert float(a3) == pytest.approx(12.0889, abs=1e-4)


@given(st.floats(1e-3, 0.249))
@settings(max_examples=40)
def test_interpolation_coefficients_positive_and_consistent(eta):
    a = np.array(mod.interpolation_coefficients(eta), dtype=float)
    assert np.all(a > 0)
    assert np.allclose(a, mod.interpolation_system_solution(eta), rtol=1e-9)


def test_interpolation_domain():
    with pytest.raises(ValueError):
        mod.interpolation_coefficients(0.25)


@given(st.floats(-1e3, 1e3))
def test_window_derivative_bound(x):
    assert abs(mod.damping_window_derivative(x)) <= mod.damping_window(x) + 1e-15


def test_periodized_window_matches_lattice_sum():
    theta, L = 0.05, 40.0
    x = np.linspace(0, L, 17)
    direct = sum(mod.damping_window(theta * (x + j * L)) for j in range(-20000, 20001))
    assert np.allclose(mod.periodized_window(x, theta, L), direct, rtol=1e-4)


def test_cole_hopf_with_zero_data(short_run, coeffs, wave):
    traj, m = short_run
    zero = FieldPair(np.zeros_like(traj.w0.u), np.zeros_like(traj.w0.v))
    h = mod.hamjac_compare(zero, m, coeffs)
    assert np.all(h.psi_breve == 0)


def test_cole_hopf_transform_solves_viscous_equation(coeffs):
    N, L = 512, 400.0
    x = np.arange(N) * L / N
    y0 = 0.05 * np.cos(2 * np.pi * 3 * x / L)
    r = mod.cole_hopf_residual(y0, 5.0, coeffs.d_projection, coeffs.c_g_fit, coeffs.nu_family, L)
    assert r < 1e-6


def test_duhamel_sum_matches_direct_loop(rng):
    S, M = 9, 3
    B = rng.normal(size=(S, M)) + 1j * rng.normal(size=(S, M))
    P = rng.normal(size=(S, M))
    Q = rng.normal(size=(S, M))
    P[:2] = 0.0
    Q[:2] = 0.0
    direct = np.zeros((S, M), dtype=complex)
    for i in range(S):
        for j in range(i):
            direct[i] += P[j] * B[i - j] + Q[j] * B[i - 1 - j]
    got = mod._duhamel(B, P, Q)
    assert np.allclose(got, direct, atol=1e-12)
    assert np.all(got[:3] == 0)


def test_duhamel_quadrature_on_linear_forcing():
    # the product rule is exact for forcing linear in time
    lam = np.array([-0.3 + 0.2j])
    h, S = 0.25, 41
    P, Q = mod._product_weights(lam, np.ones(1), h, S, deriv=False, nodes=24)
    t = np.arange(S) * h
    A = mod._duhamel(t[:, None].astype(complex), P, Q)

    def exact(tt):
        def f(s):
            return sg.chi_derivatives(tt - s)[0] * np.exp(lam[0] * (tt - s)) * s
        pts = [p for p in (tt - 2, tt - 1) if 0 < p < tt]
        re = quad(lambda s: f(s).real, 0, tt, limit=200, points=pts or None)[0]
        im = quad(lambda s: f(s).imag, 0, tt, limit=200, points=pts or None)[0]
        return re + 1j * im

    for i in (2, 4, 8, 20, 40):
        assert abs(A[i, 0] - exact(t[i])) < 1e-6 * max(1.0, abs(exact(t[i])))
