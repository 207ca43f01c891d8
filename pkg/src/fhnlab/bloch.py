"""Bloch operators of the linearization about a wave train.

L(xi) w = D (d + i xi)^2 w + c0 (d + i xi) w + F'(phi0) w acts on T-periodic
functions.  It is discretized in the Fourier basis e^{2 pi i m zeta / T},
|m| <= n_modes, where multiplication by the periodic coefficient becomes a
convolution (Toeplitz) matrix.  In this basis the cell-averaged pairing
(1/T) int_0^T conj(a) b is conj(a) . b, so the adjoint operator is the
conjugate transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .model import FhnParams, FieldPair, cubic_d1, cubic_d2, inner_product, resample
from .waves import WaveFamily, WaveTrain


class EigenSolveError(RuntimeError):
    """Dense eigensolver failure, with a conditioning diagnostic."""


class CurveCollision(RuntimeError):
    """The critical eigenvalue could not be separated from the rest of the spectrum."""


# ---------------------------------------------------------------------------
# Fourier basis helpers


def mode_numbers(n_modes: int) -> np.ndarray:
    return np.arange(-n_modes, n_modes + 1)


def grid_to_coefficients(samples: np.ndarray, n_modes: int) -> np.ndarray:
    """Fourier coefficients c_m, |m| <= n_modes, of periodic samples (Nyquist split evenly)."""
    samples = np.asarray(samples)
    n = samples.shape[-1]
    c = np.fft.fft(samples, axis=-1) / n
    out = np.zeros(samples.shape[:-1] + (2 * n_modes + 1,), dtype=complex)
    for j, m in enumerate(mode_numbers(n_modes)):
        if abs(m) < n / 2:
            out[..., j] = c[..., m % n]
        elif abs(m) == n / 2:
            out[..., j] = c[..., n // 2] / 2
    return out


def coefficients_to_grid(coefs: np.ndarray, n: int) -> np.ndarray:
    """Samples at zeta_j = j T / n of the trigonometric polynomial with coefficients ``coefs``."""
    coefs = np.asarray(coefs)
    n_modes = (coefs.shape[-1] - 1) // 2
    m = mode_numbers(n_modes)
    j = np.arange(n)
    return coefs @ np.exp(2j * np.pi * np.outer(m, j) / n)


def coefficient_pairing(a: np.ndarray, b: np.ndarray) -> complex:
    """Cell-averaged pairing of two coefficient vectors (both components stacked)."""
    return complex(np.vdot(a, b))


@dataclass
class BlochField:
    """A complex T-periodic pair stored by Fourier coefficients (u block, then v block)."""

    coefs: np.ndarray
    period: float

    @property
    def n_modes(self) -> int:
        return (len(self.coefs) // 2 - 1) // 2

    def u_coefs(self) -> np.ndarray:
        return self.coefs[: len(self.coefs) // 2]

    def v_coefs(self) -> np.ndarray:
        return self.coefs[len(self.coefs) // 2:]

    def on_grid(self, n: int) -> FieldPair:
        return FieldPair(coefficients_to_grid(self.u_coefs(), n), coefficients_to_grid(self.v_coefs(), n))

    def at(self, points: np.ndarray) -> FieldPair:
        """Values at arbitrary points of the real line (periodic extension)."""
        m = mode_numbers(self.n_modes)
        e = np.exp(2j * np.pi * np.outer(np.asarray(points), m) / self.period)
        return FieldPair(e @ self.u_coefs(), e @ self.v_coefs())

    def derivative(self, xi: float = 0.0) -> "BlochField":
        """Coefficients of (d/dzeta + i xi) applied to the field."""
        k = 2 * np.pi * mode_numbers(self.n_modes) / self.period + xi
        return BlochField(self.coefs * np.concatenate([1j * k, 1j * k]), self.period)

    def pair(self, other: "BlochField") -> complex:
        return coefficient_pairing(self.coefs, other.coefs)

    def scaled(self, s: complex) -> "BlochField":
        return BlochField(self.coefs * s, self.period)

    def conj_reflect(self) -> "BlochField":
        """Coefficients of the complex-conjugate function (m -> -m, conjugated)."""
        u = np.conj(self.u_coefs()[::-1])
        v = np.conj(self.v_coefs()[::-1])
        return BlochField(np.concatenate([u, v]), self.period)

    @classmethod
    def from_grid(cls, field: FieldPair, n_modes: int, period: float) -> "BlochField":
        return cls(np.concatenate([grid_to_coefficients(field.u, n_modes),
                                   grid_to_coefficients(field.v, n_modes)]), period)


def _coefficient_convolution(values_fn, wave: WaveTrain, n_modes: int) -> np.ndarray:
    """Toeplitz matrix of multiplication by a smooth function of u0, exact for band-limited u0."""
    pad = int(2 ** np.ceil(np.log2(max(8 * n_modes + 8, 4 * wave.n))))
    u_fine = resample(wave.profile.u, pad)
    a = np.fft.fft(values_fn(u_fine)) / pad
    m = mode_numbers(n_modes)
    diff = (m[:, None] - m[None, :]) % pad
    return a[diff]


def bloch_matrix(wave: WaveTrain, xi: complex, n_modes: int, jacobian: np.ndarray | None = None) -> np.ndarray:
    """Dense matrix of L(xi) on |m| <= n_modes.

    ``jacobian`` freezes F'(phi0) to a constant 2x2 matrix (used for the
    constant-coefficient check against closed-form roots).
    """
    p = wave.params
    m = mode_numbers(n_modes)
    nm = len(m)
    kap = 2 * np.pi * m / wave.period + xi  # xi may be complex
    c0 = wave.speed
    if jacobian is None:
        fu = _coefficient_convolution(lambda u: cubic_d1(u, p.mu), wave, n_modes)
        j01, j10, j11 = -1.0, p.epsilon, -p.epsilon * p.gamma
    else:
        fu = jacobian[0, 0] * np.eye(nm)
        j01, j10, j11 = jacobian[0, 1], jacobian[1, 0], jacobian[1, 1]
    L = np.zeros((2 * nm, 2 * nm), dtype=complex)
    L[:nm, :nm] = np.diag(-(kap**2) + 1j * c0 * kap) + fu
    L[:nm, nm:] = j01 * np.eye(nm)
    L[nm:, :nm] = j10 * np.eye(nm)
    L[nm:, nm:] = np.diag(1j * c0 * kap + j11)
    return L


def constant_coefficient_roots(params_jac: np.ndarray, speed: float, period: float, xi: float,
                               n_modes: int) -> np.ndarray:
    """Roots of det(-D k^2 + i c0 k + J - lambda) = 0 for k = xi + 2 pi m / T."""
    m = mode_numbers(n_modes)
    k = xi + 2 * np.pi * m / period
    a = -(k**2) + 1j * speed * k + params_jac[0, 0]
    b = 1j * speed * k + params_jac[1, 1]
    tr = a + b
    det = a * b - params_jac[0, 1] * params_jac[1, 0]
    disc = np.sqrt(tr**2 - 4 * det + 0j)
    return np.concatenate([(tr + disc) / 2, (tr - disc) / 2])


def rest_state_jacobian(params: FhnParams) -> np.ndarray:
    mu = params.mu
    return np.array([[float(cubic_d1(mu, mu)), -1.0], [params.epsilon, -params.epsilon * params.gamma]])


# ---------------------------------------------------------------------------
# spectra


@dataclass
class SpectrumSlice:
    xi: float
    eigenvalues: np.ndarray
    n_modes: int


def _eigvals(L: np.ndarray) -> np.ndarray:
    try:
        return sla.eigvals(L)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"eigensolver failed; condition number {np.linalg.cond(L):.3e}") from exc


def bloch_spectrum(wave: WaveTrain, xi_grid, n_modes: int = 64, n_eigs: int | None = None,
                   jacobian: np.ndarray | None = None) -> list:
    """Rightmost ``n_eigs`` eigenvalues of L(xi) for each xi (all of them by default)."""
    if n_modes < 32:
        raise ValueError("n_modes must be at least 32")
    out = []
    for xi in xi_grid:
        ev = _eigvals(bloch_matrix(wave, xi, n_modes, jacobian))
        ev = ev[np.argsort(-ev.real, kind="stable")]
        if n_eigs is not None:
            ev = ev[:n_eigs]
        out.append(SpectrumSlice(float(xi), ev, n_modes))
    return out


def symmetry_defect(slices: list) -> float:
    """Max over xi of the matching distance between sigma(L(-xi)) and conj sigma(L(xi))."""
    by_xi = {round(s.xi, 14): s for s in slices}
    worst = 0.0
    for s in slices:
        partner = by_xi.get(round(-s.xi, 14))
        if partner is None:
            continue
        a = np.conj(s.eigenvalues)
        b = partner.eigenvalues
        dist = np.abs(a[:, None] - b[None, :])
        rows, cols = linear_sum_assignment(dist)
        worst = max(worst, float(np.max(dist[rows, cols])))
    return worst


@dataclass
class StabilityReport:
    d1_pass: bool
    delta: float
    d2_pass: bool
    theta: float
    far_field_damping: float
    d3_pass: bool
    zero_gap: float
    zero_eigenvalue: complex
    stable: bool
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "D1": {"pass": self.d1_pass, "delta": self.delta},
            "D2": {"pass": self.d2_pass, "theta": self.theta, "far_field_damping": self.far_field_damping},
            "D3": {"pass": self.d3_pass, "gap": self.zero_gap, "zero": [self.zero_eigenvalue.real,
                                                                        self.zero_eigenvalue.imag]},
            "stable": self.stable,
            "notes": list(self.notes),
        }


def far_field_damping(slices: list, speed: float, fraction: float = 0.25) -> float:
    """Extrapolated distance of the high-frequency spectrum from the imaginary axis.

    At high frequency the spectrum splits into a strongly damped diffusive
    branch (Re lambda ~ -k^2) and a transport branch hugging the imaginary
    axis.  On the transport branch, taken as the eigenvalues with real part
    above -1 and |Im lambda| in the top ``fraction``,
    Re lambda ~ -delta_inf - a / k^2 - b / k^4 with k = Im lambda / c0.
    The least-squares value of delta_inf stays near the damping of the
    v-equation when that damping is present and collapses to zero without it.
    """
    ev = np.concatenate([s.eigenvalues for s in slices])
    ev = ev[ev.real > -1.0]
    im = np.abs(ev.imag)
    sel = ev[im >= np.quantile(im, 1 - fraction)]
    k = np.abs(sel.imag) / max(abs(speed), 1e-12)
    A = np.stack([np.ones_like(k), 1.0 / k**2, 1.0 / k**4], axis=1)
    coef, *_ = np.linalg.lstsq(A, -sel.real, rcond=None)
    return float(coef[0])


def _transport_branch_scale(slices: list, fraction: float = 0.25) -> float:
    ev = np.concatenate([s.eigenvalues for s in slices])
    ev = ev[ev.real > -1.0]
    im = np.abs(ev.imag)
    sel = ev[im >= np.quantile(im, 1 - fraction)]
    return float(np.max(np.abs(sel.real)))


def verify_hypotheses(slices: list, speed: float | None = None, zero_tol: float = 1e-8,
                      gap_tol: float = 1e-6, far_rel: float = 1e-2) -> StabilityReport:
    """Check (D1)-(D3) on a xi-grid covering [-pi/T, pi/T).

    (D1): delta = -(max real part over all slices, excluding the single
    eigenvalue nearest 0 at xi = 0) must be positive.
    (D2): theta = min over xi != 0 and all eigenvalues of -Re lambda / xi^2
    must be positive, and the spectrum must stay a positive distance from
    the imaginary axis at high frequency (``far_field_damping`` relative to
    the high-frequency real parts above ``far_rel``) when ``speed`` is given.
    (D3): at xi = 0 the gap between the two smallest moduli exceeds ``gap_tol``.
    """
    if len(slices) < 64:
        raise ValueError("verify_hypotheses needs at least 64 xi samples")
    zero_slice = min(slices, key=lambda s: abs(s.xi))
    ev0 = zero_slice.eigenvalues
    order = np.argsort(np.abs(ev0))
    zero_ev = complex(ev0[order[0]])
    gap = float(abs(ev0[order[1]]) - abs(ev0[order[0]]))
    d3 = abs(zero_ev) < zero_tol and gap > gap_tol and abs(zero_slice.xi) < 1e-14
    notes = []
    maxre = -np.inf
    theta = np.inf
    for s in slices:
        ev = s.eigenvalues
        if s is zero_slice:
            ev = np.delete(ev, order[0])
        maxre = max(maxre, float(np.max(ev.real)))
        if abs(s.xi) > 1e-14:
            theta = min(theta, float(np.min(-ev.real) / s.xi**2))
    delta = -maxre
    d1 = delta > 0
    d2 = theta > 0
    far = float("nan")
    if speed is not None:
        far = far_field_damping(slices, speed)
        if not far > far_rel * _transport_branch_scale(slices):
            d2 = False
            notes.append("high-frequency spectrum approaches the imaginary axis")
    if not d1:
        notes.append("spectrum with nonnegative real part away from the translational zero")
    if not d3:
        notes.append("zero eigenvalue of L(0) is not simple or not at the origin")
    return StabilityReport(d1, delta, d2, theta, far, d3, gap, zero_ev, bool(d1 and d2 and d3), notes)


# ---------------------------------------------------------------------------
# critical curve


@dataclass
class CriticalCurve:
    xi: np.ndarray
    lam: np.ndarray
    Phi: list
    Phi_adj: list
    xi0: float
    n_modes: int
    period: float
    eig_residuals: np.ndarray
    rho_description: str = "C-infinity bump, equal to 1 on [-xi0/2, xi0/2], supported in (-xi0, xi0)"

    @property
    def center(self) -> int:
        return int(np.argmin(np.abs(self.xi)))

    def adjoint0(self) -> BlochField:
        return self.Phi_adj[self.center]

    def fit(self, degree: int = 8):
        """Complex least-squares polynomial fit of lambda_c(xi); returns coefficients (ascending)."""
        s = self.xi / self.xi0
        V = np.vander(s, degree + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(V, self.lam, rcond=None)
        return coef / self.xi0 ** np.arange(degree + 1)

    def as_dict(self) -> dict:
        return {
            "xi": self.xi.tolist(),
            "lambda_re": self.lam.real.tolist(),
            "lambda_im": self.lam.imag.tolist(),
            "Phi": [[f.coefs.real.tolist(), f.coefs.imag.tolist()] for f in self.Phi],
            "Phi_adj": [[f.coefs.real.tolist(), f.coefs.imag.tolist()] for f in self.Phi_adj],
            "xi0": self.xi0,
            "n_modes": self.n_modes,
            "period": self.period,
            "eig_residuals": self.eig_residuals.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriticalCurve":
        T = float(d["period"])

        def fields(lst):
            return [BlochField(np.array(r) + 1j * np.array(i), T) for r, i in lst]

        return cls(np.array(d["xi"]), np.array(d["lambda_re"]) + 1j * np.array(d["lambda_im"]),
                   fields(d["Phi"]), fields(d["Phi_adj"]), float(d["xi0"]), int(d["n_modes"]), T,
                   np.array(d["eig_residuals"]))


def _eig_lr(L: np.ndarray):
    try:
        w, vl, vr = sla.eig(L, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"eigensolver failed; condition number {np.linalg.cond(L):.3e}") from exc
    return w, vl, vr


def translational_pair(wave: WaveTrain, n_modes: int):
    """Eigenvalue nearest 0 of L(0), its kernel vector and adjoint kernel vector.

    The adjoint vector is normalized by <adjoint, phi0'> = 1 and the kernel
    vector by <adjoint, kernel> = 1, so that it coincides with phi0'.
    """
    T = wave.period
    L = bloch_matrix(wave, 0.0, n_modes)
    w, vl, vr = _eig_lr(L)
    i = int(np.argmin(np.abs(w)))
    dphi = BlochField.from_grid(wave.derivative(1), n_modes, T)
    adj = BlochField(vl[:, i], T)
    adj = adj.scaled(1.0 / np.conj(adj.pair(dphi)))
    ker = BlochField(vr[:, i], T)
    ker = ker.scaled(1.0 / adj.pair(ker))
    return complex(w[i]), ker, adj, dphi


def default_xi0(wave: WaveTrain, n_modes: int = 64, n_scan: int = 41, cap_fraction: float = 0.2) -> float:
    """Half the distance from 0 to the first near-collision of the critical branch, capped at 0.2 pi/T."""
    cap = cap_fraction * np.pi / wave.period
    xs = np.linspace(0.0, np.pi / wave.period, n_scan)
    prev = 0.0
    for x in xs:
        ev = _eigvals(bloch_matrix(wave, float(x), n_modes))
        d = np.abs(ev - prev)
        order = np.argsort(d)
        prev = ev[order[0]]
        sep = d[order[1]] - d[order[0]]
        if x > 0 and sep < 1e-6:
            return float(min(cap, x / 2))
    return float(cap)


def critical_curve(wave: WaveTrain, xi0: float | None = None, n_xi: int = 41, n_modes: int = 64,
                   min_xi0: float = 1e-5) -> CriticalCurve:
    """Continue the eigenvalue through 0 on xi in [-xi0, xi0] with eigenfunctions.

    Phi_xi is normalized by <Phi_adj_0, Phi_xi> = 1 and Phi_adj_xi by
    <Phi_adj_xi, Phi_xi> = 1.  A near-collision of the continued eigenvalue
    with another one halves xi0 and restarts, down to ``min_xi0``.
    """
    if n_xi % 2 == 0:
        n_xi += 1
    if xi0 is None:
        xi0 = default_xi0(wave, n_modes)
    lam0, ker0, adj0, _ = translational_pair(wave, n_modes)
    while True:
        try:
            return _trace_curve(wave, xi0, n_xi, n_modes, lam0, ker0, adj0)
        except CurveCollision:
            xi0 /= 2
            if xi0 < min_xi0:
                raise


def _trace_curve(wave, xi0, n_xi, n_modes, lam0, ker0, adj0) -> CriticalCurve:
    T = wave.period
    half = n_xi // 2
    xis = xi0 * np.arange(-half, half + 1) / half
    lam = np.zeros(n_xi, dtype=complex)
    Phi: list = [None] * n_xi
    Adj: list = [None] * n_xi
    resid = np.zeros(n_xi)
    lam[half], Phi[half], Adj[half] = lam0, ker0, adj0
    resid[half] = _residual(wave, 0.0, n_modes, lam0, ker0)
    for direction in (1, -1):
        hist = [lam0]
        for j in range(1, half + 1):
            idx = half + direction * j
            xi = float(xis[idx])
            L = bloch_matrix(wave, xi, n_modes)
            w, vl, vr = _eig_lr(L)
            pred = hist[-1] if len(hist) < 2 else 2 * hist[-1] - hist[-2]
            d = np.abs(w - pred)
            order = np.argsort(d)
            i = int(order[0])
            step = abs(hist[-1] - (hist[-2] if len(hist) > 1 else hist[-1])) + abs(w[i] - hist[-1])
            if d[order[1]] < max(2.0 * d[i], 1e-10) or d[order[1]] < 4 * step:
                raise CurveCollision(f"critical eigenvalue not separated at xi = {xi:.3e}")
            phi = BlochField(vr[:, i], T)
            phi = phi.scaled(1.0 / adj0.pair(phi))
            adj = BlochField(vl[:, i], T)
            adj = adj.scaled(1.0 / np.conj(adj.pair(phi)))
            lam[idx], Phi[idx], Adj[idx] = w[i], phi, adj
            resid[idx] = _residual(wave, xi, n_modes, w[i], phi, L)
            hist.append(w[i])
    return CriticalCurve(xis, lam, Phi, Adj, float(xi0), n_modes, T, resid)


def _residual(wave, xi, n_modes, lam, phi: BlochField, L=None) -> float:
    if L is None:
        L = bloch_matrix(wave, xi, n_modes)
    r = L @ phi.coefs - lam * phi.coefs
    return float(np.linalg.norm(r) / np.linalg.norm(phi.coefs))


def eigenpair_at(wave: WaveTrain, xi: complex, n_modes: int, near: complex, adj0: BlochField):
    """Critical eigen-triple at an arbitrary xi, selected as the eigenvalue nearest ``near``."""
    T = wave.period
    L = bloch_matrix(wave, xi, n_modes)
    w, vl, vr = _eig_lr(L)
    i = int(np.argmin(np.abs(w - near)))
    phi = BlochField(vr[:, i], T)
    phi = phi.scaled(1.0 / adj0.pair(phi))
    adj = BlochField(vl[:, i], T)
    adj = adj.scaled(1.0 / np.conj(adj.pair(phi)))
    return complex(w[i]), phi, adj


def lambda_derivative(curve: CriticalCurve, index: int, speed: float) -> complex:
    """lambda_c'(xi) = i (c0 + 2 <Phi_adj_xi, D (d + i xi) Phi_xi>), the Hellmann-Feynman identity."""
    xi = float(curve.xi[index])
    phi = curve.Phi[index]
    dphi = phi.derivative(xi)
    nm = len(dphi.coefs) // 2
    Ddphi = BlochField(np.concatenate([dphi.coefs[:nm], np.zeros(nm)]), curve.period)
    return 1j * (speed + 2 * curve.Phi_adj[index].pair(Ddphi))


# ---------------------------------------------------------------------------
# dispersion coefficients


@dataclass
class DispersionCoefficients:
    c_g_fit: float
    c_g_projection: float
    c_g_family: float
    d_fit: float
    d_projection: float
    nu_family: float
    nu_projection: float
    nu_projection_literal: float
    rel_cg_fit_projection: float
    rel_cg_fit_family: float
    rel_d: float
    rel_nu: float

    @property
    def c_g(self) -> float:
        return self.c_g_fit

    @property
    def d(self) -> float:
        return self.d_fit

    @property
    def nu(self) -> float:
        return self.nu_family

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "DispersionCoefficients":
        return cls(**d)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def dispersion_coefficients(curve: CriticalCurve, family: WaveFamily, degree: int = 8) -> DispersionCoefficients:
    """c_g, d and nu, each by two independent routes.

    Route (a): polynomial fit of lambda_c(xi) = -i c_g xi - d xi^2 + ...,
    and nu = -omega''(1)/2 from the family.  Route (b): projections against
    the adjoint kernel,

        c_g = -2 <Phi_adj_0, D phi0''> - c0,
        d   = <Phi_adj_0, D phi0' + 2 D d_zeta d_k phi>,
        nu  = <Phi_adj_0, D phi0'' + 2 D d_zeta^2 d_k phi + omega'(1) d_zeta d_k phi
                            + 1/2 F''(phi0)(d_k phi, d_k phi)>,

    the last obtained by pairing the twice k-differentiated profile equation
    with the adjoint kernel, with omega'(1) = -2 <Phi_adj_0, D phi0''>.
    ``nu_projection_literal`` evaluates the same expression with the
    third-derivative term read as d_zeta d_k^2 phi, for comparison.
    """
    wave = family.wave
    T = wave.period
    n = wave.n
    adj = curve.adjoint0().on_grid(n)
    c0 = wave.speed
    p = wave.params
    coef = curve.fit(degree)
    c_g_fit = float(-coef[1].imag)
    d_fit = float(-coef[2].real)

    def Dfield(f: FieldPair) -> FieldPair:
        return FieldPair(f.u, np.zeros_like(f.v))

    ip = lambda f: inner_product(adj, f, T)  # noqa: E731
    phi1 = wave.derivative(1)
    phi2 = wave.derivative(2)
    omega_d1_proj = float((-2 * ip(Dfield(phi2))).real)
    c_g_proj = omega_d1_proj - c0
    d_proj = float(ip(Dfield(phi1) + 2 * Dfield(family.dzk)).real)
    curv = cubic_d2(wave.profile.u, p.mu)
    fpp = FieldPair(curv * family.dk.u**2, np.zeros(n))
    base = ip(Dfield(phi2)) + omega_d1_proj * ip(family.dzk) + 0.5 * ip(fpp)
    nu_proj = float((base + 2 * ip(Dfield(family.dzzk))).real)
    dzkk = family.dkk.map(lambda a: np.fft.ifft(1j * 2 * np.pi * np.fft.fftfreq(n, T / n) * np.fft.fft(a)).real)
    nu_lit = float((base + 2 * ip(Dfield(dzkk))).real)
    nu_fam = -0.5 * family.omega_d2
    c_g_fam = family.omega_d1 - c0
    return DispersionCoefficients(
        c_g_fit=c_g_fit, c_g_projection=c_g_proj, c_g_family=c_g_fam,
        d_fit=d_fit, d_projection=d_proj, nu_family=nu_fam, nu_projection=nu_proj,
        nu_projection_literal=nu_lit,
        rel_cg_fit_projection=_rel(c_g_fit, c_g_proj), rel_cg_fit_family=_rel(c_g_fit, c_g_fam),
        rel_d=_rel(d_fit, d_proj), rel_nu=_rel(nu_proj, nu_fam),
    )
