from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from fhnlab import bloch, waves
from fhnlab.model import FhnParams


def test_constant_coefficient_spectrum_matches_quadratic_formula(wave):
    J = bloch.rest_state_jacobian(wave.params)
    for xi in (0.0, 0.013, -0.04):
        ev = np.linalg.eigvals(bloch.bloch_matrix(wave, xi, 32, jacobian=J))
        roots = bloch.constant_coefficient_roots(J, wave.speed, wave.period, xi, 32)
        rows, cols = linear_sum_assignment(np.abs(ev[:, None] - roots[None, :]))
        assert np.max(np.abs(ev[rows] - roots[cols])) < 1e-9 * max(1, np.max(np.abs(roots)))


def test_translational_eigenpair(wave, translational):
    lam0, ker, adj, _ = translational
    assert abs(lam0) < 1e-8
    g = ker.on_grid(wave.n)
    d = wave.derivative(1)
    scale = np.vdot(d.u, g.u) / np.vdot(g.u, g.u)
    assert np.max(np.abs(g.u * scale - d.u)) < 1e-6 * np.max(np.abs(d.u))


@pytest.fixture(scope="module")
def slices(wave):
    T = wave.period
    xi = -np.pi / T + 2 * np.pi / T * np.arange(64) / 64
    return bloch.bloch_spectrum(wave, xi, 48)


def test_hypotheses_hold(slices, wave):
    rep = bloch.verify_hypotheses(slices, speed=wave.speed)
    assert rep.d1_pass and rep.d2_pass and rep.d3_pass


def test_d1_detects_injected_unstable_eigenvalue(slices, wave):
    bad = [bloch.SpectrumSlice(s.xi, s.eigenvalues.copy(), s.n_modes) for s in slices]
    bad[5].eigenvalues[0] = 1e-3 + 0.2j
    rep = bloch.verify_hypotheses(bad, speed=wave.speed)
    assert not rep.d1_pass and not rep.stable


def test_d2_fails_without_v_damping(wave):
    params = FhnParams(wave.params.mu, 0.0, wave.params.epsilon, "custom")
    w0 = waves.solve_profile(params, wave.profile, wave.speed, wave.period)
    T = w0.period
    xi = -np.pi / T + 2 * np.pi / T * np.arange(64) / 64
    rep = bloch.verify_hypotheses(bloch.bloch_spectrum(w0, xi, 48), speed=w0.speed)
    assert not rep.d2_pass


def test_spectrum_reflection_symmetry(slices):
    assert bloch.symmetry_defect(slices) < 1e-8


def test_too_few_samples_rejected(slices):
    with pytest.raises(ValueError):
        bloch.verify_hypotheses(slices[:10])


def test_curve_through_origin_with_derivative_eigenfunction(curve, wave):
    assert abs(curve.lam[curve.center]) < 1e-8
    phi0 = curve.Phi[curve.center].on_grid(wave.n)
    d = wave.derivative(1)
    assert np.max(np.abs((phi0 - d).stacked())) < 1e-6 * np.max(np.abs(d.stacked()))
    assert np.max(curve.eig_residuals) < 1e-8


def test_curve_expansion_remainder_is_cubic(curve, coeffs):
    xi = curve.xi
    rem = np.abs(curve.lam + 1j * coeffs.c_g_fit * xi + coeffs.d_fit * xi**2)
    sel = (np.abs(xi) > curve.xi0 / 8)
    slope = np.polyfit(np.log(np.abs(xi[sel])), np.log(rem[sel]), 1)[0]
    assert slope > 2.7


def test_dispersion_coefficients_agree_across_routes(coeffs, wave):
    assert coeffs.rel_cg_fit_family < 1e-3
    assert coeffs.rel_cg_fit_projection < 1e-3
    assert coeffs.rel_d < 1e-3 and coeffs.d_fit > 0
    assert coeffs.rel_nu < 1e-2


def test_lambda_derivative_matches_curve_fit(curve, coeffs, wave):
    lp = bloch.lambda_derivative(curve, curve.center, wave.speed)
    assert abs(lp - (-1j * coeffs.c_g_fit)) < 1e-6


def test_curve_roundtrip(curve):
    back = bloch.CriticalCurve.from_dict(curve.as_dict())
    assert np.allclose(back.lam, curve.lam)
