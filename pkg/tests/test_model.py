from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhnlab.model import (FhnParams, FieldPair, Grid, ReactionInputError, cubic, cubic_d1, cubic_d2,
                          evaluate_displaced, evaluate_reaction, evaluate_rescaled_reaction, inner_product,
                          reaction_derivatives, resample, rescale_excitable, shift_periodic,
                          spectral_derivative, trig_interpolate)

P = FhnParams(0.3, 0.05, 0.002)
finite = st.floats(-3, 3, allow_nan=False)


def _bandlimited(rng, n, modes=10, length=1.0):
    x = np.arange(n) * length / n
    out = np.zeros(n)
    for j in range(1, modes + 1):
        a, b = rng.normal(size=2) / j
        out += a * np.cos(2 * np.pi * j * x / length) + b * np.sin(2 * np.pi * j * x / length)
    return out


@given(finite, finite)
def test_rest_state_is_equilibrium(u, v):
    F = evaluate_reaction(FieldPair(np.array([P.mu]), np.array([0.0])), P)
    assert F.u[0] == 0.0 and F.v[0] == 0.0


@given(finite, finite)
def test_reaction_matches_closed_form(u, v):
    F = evaluate_reaction(FieldPair(np.array([u]), np.array([v])), P)
    assert F.u[0] == pytest.approx(u * (1 - u) * (u - P.mu) - v, abs=1e-12)
    assert F.v[0] == pytest.approx(P.epsilon * (u - P.gamma * v - P.mu), abs=1e-15)


@given(finite, finite)
@settings(max_examples=50)
def test_jacobian_matches_finite_differences(u, v):
    h = 1e-6
    s = FieldPair(np.array([u]), np.array([v]))
    J = reaction_derivatives(s, P)[0]
    for col, (du, dv) in enumerate(((h, 0.0), (0.0, h))):
        plus = evaluate_reaction(FieldPair(np.array([u + du]), np.array([v + dv])), P)
        minus = evaluate_reaction(FieldPair(np.array([u - du]), np.array([v - dv])), P)
        fd = np.array([plus.u[0] - minus.u[0], plus.v[0] - minus.v[0]]) / (2 * h)
        assert np.allclose(J[:, col], fd, atol=1e-6)


@given(finite)
def test_cubic_derivatives(u):
    h = 1e-5
    assert cubic_d1(u, 0.3) == pytest.approx((cubic(u + h, 0.3) - cubic(u - h, 0.3)) / (2 * h), abs=1e-7)
    assert cubic_d2(u, 0.3) == pytest.approx((cubic_d1(u + h, 0.3) - cubic_d1(u - h, 0.3)) / (2 * h), abs=1e-7)


def test_bilinear_form_is_second_derivative():
    s = FieldPair(np.array([0.4]), np.array([0.1]))
    B = reaction_derivatives(s, P, order=2)
    a = FieldPair(np.array([1.0]), np.array([0.3]))
    val = B(a, a)
    assert val.u[0] == pytest.approx(cubic_d2(0.4, 0.3))
    assert val.v[0] == 0.0


def test_nonfinite_input_rejected():
    with pytest.raises(ReactionInputError):
        evaluate_reaction(FieldPair(np.array([0.1, np.nan]), np.array([0.0, 0.0])), P)


def test_parameter_validation():
    with pytest.raises(ValueError):
        FhnParams(0.3, 0.0, 0.002)
    with pytest.raises(ValueError):
        FhnParams(0.6, 0.05, 0.002)
    with pytest.raises(ValueError):
        FhnParams(0.3, 0.05, 0.002, "excitable")
    FhnParams(0.3, 0.0, 0.002, "custom")


@given(st.floats(-0.9, -0.05), st.floats(0.01, 1), st.floats(1e-4, 0.1), finite, finite)
@settings(max_examples=40)
def test_excitable_rescaling_conjugates_reaction(mu, gamma, eps, u, v):
    params = FhnParams(mu, gamma, eps, "excitable")
    new, sc = rescale_excitable(params)
    state = FieldPair(np.array([u]), np.array([v]))
    F = evaluate_reaction(state, params)
    Ft = evaluate_rescaled_reaction(sc.to_rescaled(state), new)
    # u~_t' = F~ with t~ = s^2 t:  F_u / (su * st) and F_v / (sv * st)
    assert Ft.u[0] == pytest.approx(F.u[0] / (sc.u_scale * sc.time), rel=1e-9, abs=1e-12)
    assert Ft.v[0] == pytest.approx(F.v[0] / (sc.v_scale * sc.time), rel=1e-9, abs=1e-12)
    back = sc.from_rescaled(sc.to_rescaled(state))
    assert back.u[0] == pytest.approx(u) and back.v[0] == pytest.approx(v)


def test_spectral_derivative_of_trig_polynomial():
    n, L = 64, 7.0
    x = np.arange(n) * L / n
    f = np.sin(3 * 2 * np.pi * x / L)
    k = 3 * 2 * np.pi / L
    assert np.allclose(spectral_derivative(f, L, 1), k * np.cos(3 * 2 * np.pi * x / L), atol=1e-11)
    assert np.allclose(spectral_derivative(f, L, 2), -k**2 * f, atol=1e-10)


def test_inner_product_is_cell_average():
    a = FieldPair(np.ones(8), np.zeros(8))
    b = FieldPair(np.full(8, 2.0), np.ones(8))
    assert inner_product(a, b) == pytest.approx(2.0)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_displaced_evaluation_matches_interpolation(seed):
    rng = np.random.default_rng(seed)
    n, L = 128, 60.0
    f = _bandlimited(rng, n, 12, L)
    disp = rng.uniform(-3, 3, n)
    x = np.arange(n) * L / n
    direct = trig_interpolate(f, L, x - disp)
    assert np.max(np.abs(evaluate_displaced(f, L, disp) - direct)) < 1e-11 * max(1, np.max(np.abs(f)))


@given(st.floats(-5, 5))
@settings(max_examples=25)
def test_constant_shift_matches_interpolation(shift):
    rng = np.random.default_rng(1)
    n, L = 64, 10.0
    f = _bandlimited(rng, n, 8, L)
    x = np.arange(n) * L / n
    assert np.allclose(shift_periodic(f, L, shift), trig_interpolate(f, L, x + shift), atol=1e-11)


def test_resample_roundtrip_exact_for_bandlimited():
    rng = np.random.default_rng(2)
    f = _bandlimited(rng, 64, 10)
    assert np.allclose(resample(resample(f, 256), 64), f, atol=1e-13)


def test_grid_properties():
    g = Grid(128, 60.0, 4)
    assert g.size == 512 and g.length == 240.0
    assert g.points[1] == pytest.approx(60.0 / 128)
    with pytest.raises(ValueError):
        Grid(7, 1.0)
