"""FitzHugh-Nagumo reaction terms, parameters, grids and Fourier calculus.

Everything downstream works with the co-moving system

    u_t = D u_zz + c0 u_z + F(u),   D = diag(1, 0),
    F(u, v) = (u (1 - u)(u - mu) - v,  eps (u - gamma v - mu)),

sampled on periodic collocation grids.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

DIFFUSION = np.array([1.0, 0.0])

REGIMES = ("oscillatory", "excitable", "custom")


class ReactionInputError(ValueError):
    """Raised when a state handed to the reaction terms contains non-finite values."""

    def __init__(self, component: str, index: int, value: complex):
        self.component = component
        self.index = index
        self.value = value
        super().__init__(f"non-finite {component}[{index}] = {value!r}")


@dataclass(frozen=True)
class FhnParams:
    """Model parameters (mu, gamma, epsilon) with a regime tag."""

    mu: float
    gamma: float
    epsilon: float
    regime: str = "oscillatory"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not (self.gamma > 0 or (self.regime == "custom" and self.gamma == 0)):
            raise ValueError("gamma must be positive (zero is allowed only for the custom regime)")
        if self.regime == "oscillatory" and not (0.0 < self.mu < 0.5):
            raise ValueError("oscillatory regime needs 0 < mu < 1/2")
        if self.regime == "excitable" and not self.mu < 0.0:
            raise ValueError("excitable regime needs mu < 0")

    @property
    def rest_state(self) -> tuple[float, float]:
        return (self.mu, 0.0)

    def as_dict(self) -> dict:
        return {"mu": self.mu, "gamma": self.gamma, "epsilon": self.epsilon, "regime": self.regime}


@dataclass
class FieldPair:
    """Two sampled components (u, v) on a common grid. Entries may be complex."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u)
        self.v = np.asarray(self.v)
        if self.u.shape != self.v.shape:
            raise ValueError(f"component shapes differ: {self.u.shape} vs {self.v.shape}")

    @classmethod
    def from_stacked(cls, a: np.ndarray) -> "FieldPair":
        a = np.asarray(a)
        half = a.shape[0] // 2
        return cls(a[:half], a[half:])

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def copy(self) -> "FieldPair":
        return FieldPair(self.u.copy(), self.v.copy())

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.v))))

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "FieldPair":
        return FieldPair(fn(self.u), fn(self.v))

    def __add__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.u - other.u, self.v - other.v)

    def __mul__(self, s) -> "FieldPair":
        return FieldPair(self.u * s, self.v * s)

    __rmul__ = __mul__

    def __len__(self) -> int:
        return len(self.u)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of ``cells`` copies of a cell of length ``period``."""

    n: int
    period: float
    cells: int = 1

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError("n must be an even integer >= 8")
        if self.cells < 1:
            raise ValueError("cells must be >= 1")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @property
    def length(self) -> float:
        return self.cells * self.period

    @property
    def size(self) -> int:
        return self.n * self.cells

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size) * self.spacing

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT ordering for the whole domain."""
        return 2.0 * np.pi * np.fft.fftfreq(self.size, d=self.spacing)


# ---------------------------------------------------------------------------
# reaction terms


def cubic(u, mu):
    return u * (1.0 - u) * (u - mu)


def cubic_d1(u, mu):
    return -3.0 * u**2 + 2.0 * (1.0 + mu) * u - mu


def cubic_d2(u, mu):
    return -6.0 * u + 2.0 * (1.0 + mu)


def _check_finite(state: FieldPair) -> None:
    for name, arr in (("u", state.u), ("v", state.v)):
        bad = ~np.isfinite(np.atleast_1d(arr))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ReactionInputError(name, i, np.atleast_1d(arr)[i])


def evaluate_reaction(state: FieldPair, params: FhnParams) -> FieldPair:
    """Pointwise F(u, v)."""
    _check_finite(state)
    u, v = state.u, state.v
    return FieldPair(
        cubic(u, params.mu) - v,
        params.epsilon * (u - params.gamma * v - params.mu),
    )


def reaction_derivatives(state: FieldPair, params: FhnParams, order: int = 1):
    """Derivatives of F at each sample.

    ``order=1`` returns an array of shape (N, 2, 2) holding the Jacobian.
    ``order=2`` returns a function ``(a, b) -> FieldPair`` evaluating the
    symmetric bilinear form F''(state)(a, b); its second component is zero.
    """
    _check_finite(state)
    u = np.atleast_1d(state.u)
    if order == 1:
        jac = np.empty(u.shape + (2, 2))
        jac[..., 0, 0] = cubic_d1(u, params.mu)
        jac[..., 0, 1] = -1.0
        jac[..., 1, 0] = params.epsilon
        jac[..., 1, 1] = -params.epsilon * params.gamma
        return jac
    if order == 2:
        curv = cubic_d2(u, params.mu)

        def bilinear(a: FieldPair, b: FieldPair) -> FieldPair:
            first = curv * a.u * b.u
            return FieldPair(first, np.zeros_like(first))

        return bilinear
    raise ValueError("order must be 1 or 2")


# ---------------------------------------------------------------------------
# excitable rescaling


@dataclass(frozen=True)
class ExcitableScales:
    """Factors of the map x~ = sx x, t~ = st t, u~ = (u - shift)/su, v~ = v/sv."""

    space: float
    time: float
    u_shift: float
    u_scale: float
    v_scale: float

    def to_rescaled(self, state: FieldPair) -> FieldPair:
        return FieldPair((state.u - self.u_shift) / self.u_scale, state.v / self.v_scale)

    def from_rescaled(self, state: FieldPair) -> FieldPair:
        return FieldPair(state.u * self.u_scale + self.u_shift, state.v * self.v_scale)


def rescale_excitable(params: FhnParams) -> tuple[FhnParams, ExcitableScales]:
    """Map excitable parameters (mu < 0) to the unit-interval formulation.

    The returned parameters describe u~_t = u~_xx + u~(1-u~)(u~-mu~) - v~,
    v~_t = eps~ (u~ - gamma~ v~); evaluate them with
    :func:`evaluate_rescaled_reaction` (no constant shift in the second
    component).
    """
    mu = params.mu
    if not mu < 0:
        raise ValueError("excitable rescaling is defined for mu < 0")
    s = 1.0 - mu
    new = FhnParams(-mu / s, s**2 * params.gamma, params.epsilon / s**4, regime="custom")
    return new, ExcitableScales(space=s, time=s**2, u_shift=mu, u_scale=s, v_scale=s**3)


def evaluate_rescaled_reaction(state: FieldPair, params: FhnParams) -> FieldPair:
    _check_finite(state)
    return FieldPair(
        cubic(state.u, params.mu) - state.v,
        params.epsilon * (state.u - params.gamma * state.v),
    )


# ---------------------------------------------------------------------------
# Fourier calculus


def spectral_derivative(values: np.ndarray, length: float, order: int = 1) -> np.ndarray:
    """Derivative of periodic samples on [0, length) by FFT.

    The Nyquist mode is dropped for odd orders so that real data stay real.
    """
    values = np.asarray(values)
    m = values.shape[-1]
    k = 2.0 * np.pi * np.fft.fftfreq(m, d=length / m)
    if order % 2 and m % 2 == 0:
        k = k.copy()
        k[m // 2] = 0.0
    out = np.fft.ifft((1j * k) ** order * np.fft.fft(values, axis=-1), axis=-1)
    if np.isrealobj(values):
        return out.real
    return out


def differentiation_matrix(n: int, length: float) -> np.ndarray:
    """Fourier collocation first-derivative matrix (n even)."""
    h = 2.0 * np.pi / n
    col = np.zeros(n)
    j = np.arange(1, n)
    col[1:] = 0.5 * (-1.0) ** j / np.tan(j * h / 2.0)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx] * (2.0 * np.pi / length)


def second_differentiation_matrix(n: int, length: float) -> np.ndarray:
    """Fourier collocation second-derivative matrix, Nyquist mode kept."""
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    eye = np.eye(n)
    return np.fft.ifft(-(k**2)[:, None] * np.fft.fft(eye, axis=0), axis=0).real


def inner_product(a: FieldPair, b: FieldPair, length: float | None = None) -> complex:
    """Cell-averaged pairing <a, b> = (1/T) int_0^T conj(a) . b (trapezoid rule).

    The average rather than the plain integral is used throughout, so that
    the pointwise pairing conj(a(x)) . b(x) has cell mean <a, b>; ``length``
    is accepted for call-site clarity and does not change the value.
    """
    return complex((np.vdot(a.u, b.u) + np.vdot(a.v, b.v)) / len(a.u))


def trig_interpolate(values: np.ndarray, length: float, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of periodic samples at arbitrary points."""
    values = np.asarray(values)
    m = values.shape[-1]
    coef = np.fft.fft(values) / m
    k = np.fft.fftfreq(m, d=1.0 / m)
    if m % 2 == 0:
        # split the Nyquist coefficient symmetrically so the interpolant is real for real data
        coef = coef.copy()
        nyq = coef[m // 2]
        coef[m // 2] = nyq / 2
        coef = np.append(coef, nyq / 2)
        k = np.append(k, m // 2)
        k[m // 2] = -m // 2
    phase = np.exp(2j * np.pi * np.outer(np.asarray(points), k) / length)
    out = phase @ coef
    if np.isrealobj(values):
        return out.real
    return out


def shift_periodic(values: np.ndarray, length: float, shift) -> np.ndarray:
    """Samples of f(x + shift) for periodic samples of f. ``shift`` may be a field."""
    values = np.asarray(values)
    m = values.shape[-1]
    shift = np.asarray(shift, dtype=float)
    if shift.ndim == 0:
        k = 2.0 * np.pi * np.fft.fftfreq(m, d=length / m)
        if m % 2 == 0:
            k = k.copy()
            k[m // 2] = 0.0
        out = np.fft.ifft(np.fft.fft(values) * np.exp(1j * k * shift))
        return out.real if np.isrealobj(values) else out
    x = np.arange(m) * length / m
    return trig_interpolate(values, length, x + shift)


def evaluate_displaced(values: np.ndarray, length: float, displacement: np.ndarray,
                       tol: float = 1e-16, max_terms: int = 60) -> np.ndarray:
    """Samples of f(x_i - displacement_i) for the trigonometric interpolant f of periodic samples.

    Each target point is split into the nearest grid node plus a remainder
    |delta| <= h/2; the interpolant is expanded in a Taylor series about
    that node with spectrally computed derivatives.  The series converges
    like (k_max h / 2)^n / n!, so a few dozen FFTs replace the O(N^2)
    direct evaluation.
    """
    values = np.asarray(values)
    m = values.shape[-1]
    h = length / m
    disp = np.asarray(displacement, dtype=float)
    j = np.rint(disp / h).astype(np.int64)
    delta = disp - j * h
    idx = (np.arange(m) - j) % m
    k = 2.0 * np.pi * np.fft.fftfreq(m, d=h)
    k[m // 2] = 0.0
    V = np.fft.fft(values)
    dmax = float(np.max(np.abs(delta))) if delta.size else 0.0
    kmax = float(np.max(np.abs(k)))
    out = np.zeros(m, dtype=complex)
    fac = np.ones(m)
    bound = 1.0
    for n in range(max_terms):
        deriv = np.fft.ifft((1j * k) ** n * V)
        out += fac * deriv[idx]
        fac = fac * (-delta) / (n + 1)
        bound = bound * dmax * kmax / (n + 1)
        if bound < tol:
            break
    return out.real if np.isrealobj(values) else out


def resample(values: np.ndarray, m: int) -> np.ndarray:
    """Change the number of samples of a periodic function by Fourier padding or truncation."""
    values = np.asarray(values)
    n = values.shape[-1]
    if m == n:
        return values.copy()
    coef = np.fft.fft(values) / n
    out = np.zeros(m, dtype=complex)
    if m > n:
        h = n // 2
        out[:h] = coef[:h]
        out[m - h + 1:] = coef[n - h + 1:]
        out[h] = coef[h] / 2
        out[m - h] = coef[h] / 2
    else:
        h = m // 2
        out[:h] = coef[:h]
        out[m - h + 1:] = coef[n - h + 1:]
        out[h] = coef[h] + coef[n - h]
    res = np.fft.ifft(out * m)
    return res.real if np.isrealobj(values) else res


def tile(values: np.ndarray, cells: int) -> np.ndarray:
    return np.tile(np.asarray(values), cells)


class Timer:
    """Wall-clock helper used to report stage runtimes."""

    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start
