from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from fhnlab import bloch, floquet
from fhnlab.model import FieldPair


@pytest.fixture(scope="module")
def small_op(wave):
    return floquet.FineOperator(wave, cells=1, n_cell=256)


def test_nu_on_critical_curve(wave, curve):
    nus, err, data = floquet.nu_c_on_curve(wave, curve)
    assert np.max(err) < 1e-6
    assert np.allclose(nus, 1j * curve.xi, atol=1e-6)


def test_nu_at_zero_and_winding(wave):
    d = floquet.monodromy(wave, 0.0)
    assert abs(d.nu_c) < 1e-8
    assert d.winding == 0


def test_nu_expansion_is_quadratic(wave, coeffs):
    p, radii, rem = floquet.nu_expansion_exponent(wave, coeffs.c_g_fit)
    assert p >= 1.9


def test_zero_speed_rejected(wave):
    still = dataclasses.replace(wave, speed=0.0)
    with pytest.raises(floquet.ZeroSpeedError):
        floquet.monodromy(still, 0.1)


def test_rank_one_projection_and_factor_wiring(wave, curve):
    i = curve.center + 3
    r = floquet.rank_one_factors(wave, curve.lam[i])
    assert r.projection_rank == 1
    assert r.idempotency < 1e-8
    assert r.factor_defect < 1e-8


def test_factor_equals_critical_eigenfunction(wave, curve):
    i = curve.center + 4
    r = floquet.rank_one_factors(wave, curve.lam[i])
    phi = curve.Phi[i].on_grid(wave.n)
    _, a = floquet.align(r.Psi, phi)
    err = np.max(np.abs((r.Psi * a - phi).stacked())) / np.max(np.abs(phi.stacked()))
    assert err < 1e-7


def test_adjoint_factor_identity_in_conjugated_pairing(wave, curve):
    i = curve.center + 5
    r = floquet.rank_one_factors(wave, curve.lam[i])
    lp = bloch.lambda_derivative(curve, i, wave.speed)
    adj = curve.Phi_adj[i].on_grid(wave.n)
    defect = np.max(np.abs((r.Psi_adj * np.conj(lp) + adj * 1j).stacked())) / np.max(np.abs(adj.stacked()))
    assert defect < 1e-8


def test_leading_term_on_single_fourier_mode(small_op, wave):
    x = small_op.grid()
    k = 2 * np.pi * 7 / small_op.length
    b, om = -1e-4, 3.0
    g = FieldPair(np.exp(1j * k * x), np.exp(2j * k * x))
    I1, _, _ = floquet.hf_terms(small_op, b, om, g)
    p = wave.params
    expect_u = g.u / (1j * om + k**2)
    expect_v = g.v / (b + 1j * om - 1j * wave.speed * 2 * k + p.epsilon * p.gamma)
    assert np.allclose(I1.u, expect_u, atol=1e-12)
    assert np.allclose(I1.v, expect_v, atol=1e-12)


def test_resolvent_split_identity_random_data(small_op, rng):
    for _ in range(20):
        g = FieldPair(rng.normal(size=small_op.N), rng.normal(size=small_op.N))
        om = float(rng.uniform(1, 50))
        t = floquet.hf_resolvent_split(small_op, -5e-5, om, g)
        assert t.identity_defect < 1e-8
        resid = small_op.apply_shifted(-5e-5 + 1j * om, t.full.stacked()) - g.stacked()
        assert np.max(np.abs(resid)) < 1e-8 * max(1.0, np.max(np.abs(g.stacked())))


def test_iterative_and_direct_solves_agree(small_op, rng):
    g = FieldPair(rng.normal(size=small_op.N), rng.normal(size=small_op.N))
    lam = -5e-5 + 4.0j
    a, _ = small_op.solve(lam, g)
    b = small_op.solve_direct(lam, g)
    b = b[0] if isinstance(b, tuple) else b
    assert np.max(np.abs((a - b).stacked())) < 1e-8 * np.max(np.abs(b.stacked()))


@pytest.mark.parametrize("a,b", [(-1.0, -2.0), (-0.5 + 1j, -0.1), (-1.0, -1.0)])
def test_bromwich_integral_converges(a, b):
    rows = floquet.bromwich_convolution_check(a, b, 1.0, 0.5, [10, 100, 1000, 3000])
    errs = [e for _, _, e in rows]
    assert errs[-1] < 1e-3
    assert errs[-1] < errs[0]


def test_convolution_closed_form_confluent_limit():
    a = -0.7
    assert floquet.convolution_closed_form(a, a, 2.0) == pytest.approx(
        floquet.convolution_closed_form(a, a + 1e-7, 2.0), rel=1e-6)


def test_contour_left_of_poles_rejected():
    with pytest.raises(floquet.ContourPlacementError):
        floquet.bromwich_convolution_check(-1.0, 1.0, 1.0, 0.5, [10])
