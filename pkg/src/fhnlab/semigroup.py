"""Linear evolution e^{L0 t} on a multi-cell domain and its low-frequency decomposition.

The critical part of the semigroup is evaluated as a discrete Bloch sum over
the wavenumbers xi_m = 2 pi m / (cells T) that fit on the periodic domain and
lie inside the cut-off window rho.  With the cell-average pairing, a Bloch
mode Phi_xi e^{i xi zeta} on the domain has weight exactly 1, so the sum
reproduces the eigenmode evolution e^{lambda_c(xi) t} without extra factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import stats

from .bloch import CriticalCurve, eigenpair_at
from .model import FieldPair, Grid, cubic_d1, spectral_derivative, tile
from .stepper import EtdRk4, steps_for
from .waves import WaveFamily, WaveTrain


class DomainTooShort(ValueError):
    """The cut-off window holds too few discrete Bloch wavenumbers."""


class StiffnessError(ValueError):
    """The explicit part of the linear stepper is unstable for the requested dt."""


# ---------------------------------------------------------------------------
# cut-off functions


def _jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = len(a)
    return np.array([np.dot(a[:k + 1], b[k::-1]) for k in range(K)])


def _jet_exp(a: np.ndarray) -> np.ndarray:
    K = len(a)
    e = np.zeros(K)
    e[0] = np.exp(a[0])
    for k in range(1, K):
        e[k] = sum(j * a[j] * e[k - j] for j in range(1, k + 1)) / k
    return e


def _jet_reciprocal(a: np.ndarray) -> np.ndarray:
    K = len(a)
    r = np.zeros(K)
    r[0] = 1.0 / a[0]
    for k in range(1, K):
        r[k] = -sum(a[j] * r[k - j] for j in range(1, k + 1)) / a[0]
    return r


def chi_derivatives(t: float, order: int = 0) -> np.ndarray:
    """chi(t), chi'(t), ..., chi^(order)(t) for the smooth temporal cut-off.

    chi = h(t - 1) / (h(t - 1) + h(2 - t)) with h(s) = exp(-1/s) for s > 0,
    so chi = 0 on [0, 1], chi = 1 on [2, inf) and chi is C-infinity.  On
    (1, 2), chi = 1 / (1 + exp(g)) with g = 1/(t-1) - 1/(2-t); derivatives
    are propagated through Taylor jets.
    """
    out = np.zeros(order + 1)
    if t <= 1.0:
        return out
    if t >= 2.0:
        out[0] = 1.0
        return out
    K = order + 1
    k = np.arange(K)
    g = (-1.0) ** k / (t - 1.0) ** (k + 1) - 1.0 / (2.0 - t) ** (k + 1)
    if g[0] > 700:
        return out
    if g[0] < -700:
        out[0] = 1.0
        return out
    denom = _jet_exp(g)
    denom[0] += 1.0
    jet = _jet_reciprocal(denom)
    fact = np.cumprod(np.concatenate([[1.0], np.arange(1, K)]))
    return jet * fact


def chi(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.vectorize(lambda s: chi_derivatives(float(s))[0])(t)


def _smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    out = np.where(s >= 1.0, 1.0, 0.0)
    mid = (s > 0) & (s < 1)
    sm = s[mid]
    a = np.exp(-1.0 / sm)
    b = np.exp(-1.0 / (1.0 - sm))
    out[mid] = a / (a + b)
    return out


def rho(xi, xi0: float) -> np.ndarray:
    """C-infinity window: 1 on [-xi0/2, xi0/2], 0 outside (-xi0, xi0)."""
    x = np.abs(np.asarray(xi, dtype=float))
    return _smoothstep((xi0 - x) / (xi0 / 2))


# ---------------------------------------------------------------------------
# linear evolution


def multicell_grid(wave: WaveTrain, cells: int) -> Grid:
    return Grid(wave.n, wave.period, cells)


def linear_evolve(wave: WaveTrain, g: FieldPair, t_end: float, dt: float, cells: int | None = None,
                  times=None) -> tuple[np.ndarray, list]:
    """Snapshots of w_t = L0 w from w(0) = g.

    Diffusion, advection and the constant damping -eps*gamma are treated
    exactly by the exponential integrator; the periodic coupling f'(phi0) u,
    -v and eps*u are explicit.  Returns (times, list of FieldPair).
    """
    n = wave.n
    if cells is None:
        cells = len(g) // n
    if len(g) != cells * n:
        raise ValueError("g does not live on the multi-cell grid")
    grid = multicell_grid(wave, cells)
    p = wave.params
    fp = tile(cubic_d1(wave.profile.u, p.mu), cells)
    explicit_rate = float(np.max(np.abs(fp)) + 1.0 + p.epsilon)
    if dt * explicit_rate > 1.0:
        raise StiffnessError(f"dt = {dt} too large for the explicit coupling; use dt <= {1.0 / explicit_rate:.3g}")
    k = grid.wavenumbers
    c0 = wave.speed
    symbol = np.stack([-k**2 + 1j * c0 * k, 1j * c0 * k - p.epsilon * p.gamma])

    def coupling(W):
        u = np.fft.ifft(W[0])
        v = np.fft.ifft(W[1])
        return np.stack([np.fft.fft(fp * u - v), np.fft.fft(p.epsilon * u)])

    stepper = EtdRk4(symbol, dt, coupling)
    times = np.arange(0.0, t_end + 0.5 * dt, dt) if times is None else np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("snapshot times must be nonnegative and increasing")
    W = np.stack([np.fft.fft(np.asarray(g.u, dtype=complex)), np.fft.fft(np.asarray(g.v, dtype=complex))])
    out = []
    t = 0.0
    for tt in times:
        W = stepper.advance(W, steps_for(tt - t, dt) if tt > t else 0)
        t = tt
        out.append(FieldPair(np.fft.ifft(W[0]), np.fft.ifft(W[1])))
    return times, out


# ---------------------------------------------------------------------------
# discrete Bloch window


@dataclass
class BlochWindow:
    """Critical Bloch data at the domain-commensurate wavenumbers inside the rho-window."""

    wave: WaveTrain
    cells: int
    xi0: float
    c_g: float
    xi: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    Phi: list            # FieldPair per xi_m on one cell
    Phi_adj: list
    _tiles: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> Grid:
        return multicell_grid(self.wave, self.cells)

    @property
    def length(self) -> float:
        return self.cells * self.wave.period

    def _tiled(self, m: int):
        if m not in self._tiles:
            x = self.grid.points
            e = np.exp(1j * self.xi[m] * x)
            ph, ad = self.Phi[m], self.Phi_adj[m]
            self._tiles[m] = (
                FieldPair(tile(ph.u, self.cells) * e, tile(ph.v, self.cells) * e),
                FieldPair(np.conj(tile(ad.u, self.cells) * e), np.conj(tile(ad.v, self.cells) * e)),
            )
        return self._tiles[m]

    def weights(self, g: FieldPair) -> np.ndarray:
        """W_m = (1/L) int conj(Phi_adj_m e^{i xi_m zeta}) . g over the domain (cell-average pairing)."""
        N = len(g)
        W = np.empty(len(self.xi), dtype=complex)
        for m in range(len(self.xi)):
            _, conj_adj = self._tiled(m)
            W[m] = (np.dot(conj_adj.u, g.u) + np.dot(conj_adj.v, g.v)) / N
        return W

    def modes(self) -> np.ndarray:
        """e^{i xi_m zeta} on the domain grid, shape (n_xi, N)."""
        return np.exp(1j * self.xi[:, None] * self.grid.points[None, :])

    def scalar_field(self, amplitudes: np.ndarray, l: int = 0) -> np.ndarray:
        """sum_m amplitudes_m (i xi_m)^l e^{i xi_m zeta}; amplitudes already include rho and time factors."""
        a = amplitudes * (1j * self.xi) ** l
        return a @ self.modes()

    def critical_field(self, amplitudes: np.ndarray) -> FieldPair:
        u = np.zeros(self.grid.size, dtype=complex)
        v = np.zeros(self.grid.size, dtype=complex)
        for m, a in enumerate(amplitudes):
            ph, _ = self._tiled(m)
            u += a * ph.u
            v += a * ph.v
        return FieldPair(u, v)


def bloch_window(wave: WaveTrain, curve: CriticalCurve, cells: int, c_g: float, min_modes: int = 8) -> BlochWindow:
    """Evaluate the critical eigen-triple at every xi_m = 2 pi m/(cells T) with |xi_m| < xi0."""
    L = cells * wave.period
    xi0 = curve.xi0
    mmax = int(np.ceil(xi0 * L / (2 * np.pi)))
    xs = np.array([2 * np.pi * m / L for m in range(-mmax, mmax + 1)])
    xs = xs[np.abs(xs) < xi0]
    if len(xs) < min_modes:
        raise DomainTooShort(f"domain too short: only {len(xs)} Bloch wavenumbers inside the window "
                             f"(need {min_modes}); increase cells")
    coef = curve.fit()
    adj0 = curve.adjoint0()
    lams, phis, adjs = [], [], []
    for x in xs:
        near = np.polyval(coef[::-1], x)
        lam, phi, adj = eigenpair_at(wave, float(x), curve.n_modes, near, adj0)
        lams.append(lam)
        phis.append(phi.on_grid(wave.n))
        adjs.append(adj.on_grid(wave.n))
    return BlochWindow(wave, cells, xi0, c_g, xs, rho(xs, xi0), np.array(lams), phis, adjs)


def sp_amplitudes(window: BlochWindow, W: np.ndarray, t: float, j: int = 0) -> np.ndarray:
    """Time factors of (d_t + c_g d_zeta)^j S_p(t) per xi_m, including derivatives of chi."""
    ch = chi_derivatives(t, j)
    a = window.lam + 1j * window.c_g * window.xi
    fac = sum(comb(j, i) * ch[i] * a ** (j - i) for i in range(j + 1))
    return window.rho * np.exp(window.lam * t) * fac * W


def sp_apply(window: BlochWindow, g: FieldPair, t: float, j: int = 0, l: int = 0,
             weights: np.ndarray | None = None) -> np.ndarray:
    """(d_t + c_g d_zeta)^j d_zeta^l S_p(t) g as a real scalar field on the domain."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if j + l > 6:
        raise ValueError("derivative order j + l must not exceed 6")
    W = window.weights(g) if weights is None else weights
    out = window.scalar_field(sp_amplitudes(window, W, t, j), l)
    return out.real if _is_real(g) else out


def _is_real(g: FieldPair) -> bool:
    return bool(np.isrealobj(g.u) and np.isrealobj(g.v))


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class PropagatorSample:
    t: float
    input: FieldPair
    full: FieldPair
    principal_phase: np.ndarray
    principal_lift: FieldPair
    residual_sr: FieldPair
    residual_se: FieldPair
    chi_value: float

    def reassembly_defect(self) -> float:
        total = self.principal_lift + self.residual_sr + self.residual_se
        return float((total - self.full).sup_norm() / max(self.full.sup_norm(), 1e-300))

    def norms(self) -> dict:
        return {
            "t": self.t,
            "full": self.full.sup_norm(),
            "sp": float(np.max(np.abs(self.principal_phase))),
            "lift": self.principal_lift.sup_norm(),
            "sr": self.residual_sr.sup_norm(),
            "se": self.residual_se.sup_norm(),
        }


def semigroup_decompose(window: BlochWindow, family: WaveFamily, g: FieldPair, t_list, dt: float = 0.05):
    """Split e^{L0 t} g into (phi0' + d_k phi d_zeta) S_p g + S_r g + S_e g at each t in t_list."""
    t_list = np.asarray(t_list, dtype=float)
    if np.any(np.diff(t_list) <= 0):
        raise ValueError("t_list must be increasing")
    wave = window.wave
    cells = window.cells
    _, fulls = linear_evolve(wave, g, float(t_list[-1]), dt, cells, times=t_list)
    W = window.weights(g)
    dphi = FieldPair(tile(wave.derivative(1).u, cells), tile(wave.derivative(1).v, cells))
    dk = FieldPair(tile(family.dk.u, cells), tile(family.dk.v, cells))
    out = []
    for t, full in zip(t_list, fulls):
        ch = float(chi_derivatives(t)[0])
        amps = window.rho * np.exp(window.lam * t) * W
        sp = window.scalar_field(ch * amps)
        sp_z = window.scalar_field(ch * amps, 1)
        if _is_real(g):
            sp, sp_z = sp.real, sp_z.real
        lift = FieldPair(dphi.u * sp + dk.u * sp_z, dphi.v * sp + dk.v * sp_z)
        crit = window.critical_field(amps)
        if _is_real(g):
            crit = FieldPair(crit.u.real, crit.v.real)
            full = FieldPair(full.u.real, full.v.real)
        sr = crit - lift
        se = full - crit
        out.append(PropagatorSample(float(t), g, full, sp, lift, sr, se, ch))
    return out


# ---------------------------------------------------------------------------
# convective heat semigroup


def heat_propagate(g: np.ndarray, t: float, d: float, c_g: float, m: int = 0, length: float | None = None) -> np.ndarray:
    """d_zeta^m e^{(d d_zz - c_g d_z) t} g by Fourier symbol on a periodic domain of the given length."""
    if not d > 0:
        raise ValueError("d must be positive")
    g = np.asarray(g)
    N = len(g)
    length = float(N) if length is None else length
    k = 2 * np.pi * np.fft.fftfreq(N, d=length / N)
    sym = np.exp((-d * k**2 - 1j * c_g * k) * t) * (1j * k) ** m
    out = np.fft.ifft(sym * np.fft.fft(g))
    return out.real if np.isrealobj(g) else out


# ---------------------------------------------------------------------------
# decay fitting


@dataclass
class DecayFit:
    times: np.ndarray
    norms: np.ndarray
    model: str
    fitted_exponent: float      # power-law exponent p (norm ~ t^p), or -rate for the exponential model
    fitted_log_correction: bool
    window: tuple
    residual: float             # RMS residual in log coordinates
    stderr: float
    prefactor: float
    poor_fit: bool

    @property
    def rate(self) -> float:
        return -self.fitted_exponent

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "fitted_exponent": self.fitted_exponent,
            "fitted_log_correction": self.fitted_log_correction,
            "window": list(self.window),
            "residual": self.residual,
            "stderr": self.stderr,
            "prefactor": self.prefactor,
            "poor_fit": self.poor_fit,
            "samples": int(len(self.times)),
        }


def fit_decay(times, norms, model: str = "power", window: tuple | None = None,
              poor_fit_threshold: float = 0.05) -> DecayFit:
    """Least-squares decay fit in log coordinates.

    power:       norm = C t^p
    power-log:   norm = C log(2 + t) / (1 + t)^p   (reported exponent is -p)
    exponential: norm = C e^{-alpha t}             (reported exponent is -alpha)
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    else:
        window = (float(t.min()), float(t.max()))
    if len(t) < 8:
        raise ValueError(f"decay fit needs at least 8 samples in the window, got {len(t)}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("decay fit needs positive, finite norms")
    ly = np.log(y)
    if model == "power":
        x = np.log(t)
    elif model == "power-log":
        x = np.log1p(t)
        ly = ly - np.log(np.log(2 + t))
    elif model == "exponential":
        x = t
    else:
        raise ValueError(f"unknown decay model {model!r}")
    res = stats.linregress(x, ly)
    resid = float(np.sqrt(np.mean((ly - (res.intercept + res.slope * x)) ** 2)))
    return DecayFit(t, y, model, float(res.slope), model == "power-log", tuple(window), resid,
                    float(res.stderr), float(np.exp(res.intercept)), resid > poor_fit_threshold)


def sup_norm_series(samples: list, part: str) -> np.ndarray:
    return np.array([s.norms()[part] for s in samples])


def spectral_dz(values: np.ndarray, length: float, order: int = 1) -> np.ndarray:
    return spectral_derivative(values, length, order)
