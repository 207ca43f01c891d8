from __future__ import annotations

import numpy as np
import pytest

from fhnlab.stepper import EtdRk4, steps_for


def test_linear_part_is_exact():
    sym = np.array([-1.0, -3.0 + 2.0j, 0.0, -1e-9])
    st = EtdRk4(sym, 0.1, lambda U: np.zeros_like(U))
    U = st.advance(np.ones(4, dtype=complex), 10)
    assert np.allclose(U, np.exp(sym * 1.0), atol=1e-14)


def test_fourth_order_on_forced_scalar():
    # u' = -u + u^2 has the solution u = 1 / (1 + (1/u0 - 1) e^t)
    u0 = 0.2
    exact = 1 / (1 + (1 / u0 - 1) * np.exp(1.0))
    errs = []
    for dt in (0.1, 0.05):
        st = EtdRk4(np.array([-1.0]), dt, lambda U: U**2)
        errs.append(abs(st.advance(np.array([u0], dtype=complex), steps_for(1.0, dt))[0] - exact))
    assert errs[0] / errs[1] > 12


def test_complex_symbol_coefficients_accurate():
    # u' = i a u + 1 : u(t) = (e^{i a t} - 1)/(i a) from u(0) = 0
    a = 5.0
    st = EtdRk4(np.array([1j * a]), 0.3, lambda U: np.ones_like(U))
    U = st.advance(np.zeros(1, dtype=complex), 10)
    assert abs(U[0] - (np.exp(1j * a * 3.0) - 1) / (1j * a)) < 1e-12


def test_incommensurate_span_rejected():
    with pytest.raises(ValueError):
        steps_for(1.03, 0.05)
    assert steps_for(1.0, 0.05) == 20
