"""Nonlinear runs, phase modulation, modulated perturbations, damping energy and Cole-Hopf comparison.

All fields live on a periodic domain of ``cells`` copies of the wave cell.
The phase modulation is stored through its Bloch amplitudes A_m(t), so that

    psi(zeta, t) = Re sum_m A_m(t) e^{i xi_m zeta}

and every spatial derivative is exact: d_zeta^l multiplies A_m by (i xi_m)^l.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import DispersionCoefficients
from .model import (FieldPair, Grid, cubic, cubic_d1, evaluate_displaced, spectral_derivative, tile)
from .semigroup import BlochWindow, chi_derivatives, fit_decay, heat_propagate
from .stepper import EtdRk4, steps_for
from .waves import WaveFamily, WaveTrain

KINDS = ("localized", "co-periodic", "quasiperiodic", "random-bounded")


class ModulationRangeError(ValueError):
    """1 + psi_zeta left the wavenumber range covered by the wave family."""


class ColeHopfPositivityError(ValueError):
    """1 + y_breve became nonpositive, so the logarithm is undefined."""


class SnapshotDensityError(ValueError):
    """Centered time differences need snapshots on both sides of the sample time."""


# ---------------------------------------------------------------------------
# initial perturbations


def synthesize_perturbation(kind: str, amplitude: float, seed: int, grid: Grid, v_weight: float = 1.0) -> FieldPair:
    """Smooth bounded perturbation w0 with sup norm (over both components) equal to ``amplitude``.

    ``v_weight`` scales the second component relative to the first before
    normalization; passing the ratio of the wave's component ranges gives
    perturbations of equal relative size in u and v.
    """
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    if kind not in KINDS:
        raise ValueError(f"unknown perturbation kind {kind!r}; choose from {KINDS}")
    rng = np.random.default_rng(seed)
    x = grid.points
    L = grid.length
    T = grid.period
    if kind == "localized":
        c = L * (0.5 + 0.1 * rng.uniform(-1, 1))
        width = 2.0 * T
        bump = np.exp(-((x - c) / width) ** 2)
        u, v = bump, 0.5 * bump
    elif kind == "co-periodic":
        u = np.zeros_like(x)
        v = np.zeros_like(x)
        for j in range(1, 4):
            a, b, c, d = rng.normal(size=4) / j**2
            u += a * np.cos(2 * np.pi * j * x / T) + b * np.sin(2 * np.pi * j * x / T)
            v += c * np.cos(2 * np.pi * j * x / T) + d * np.sin(2 * np.pi * j * x / T)
    elif kind == "quasiperiodic":
        # two resolvable wavenumbers whose ratio approximates the golden mean
        m1 = max(1, grid.cells // 4)
        m2 = int(round(m1 * (1 + np.sqrt(5)) / 2))
        if m2 == m1:
            m2 += 1
        p1, p2 = rng.uniform(0, 2 * np.pi, 2)
        u = np.cos(2 * np.pi * m1 * x / L + p1) + np.cos(2 * np.pi * m2 * x / L + p2)
        v = 0.5 * np.sin(2 * np.pi * m1 * x / L + p2)
    else:
        k = grid.wavenumbers
        k0 = 2 * np.pi / T
        envelope = 1.0 / (1.0 + (k / k0) ** 2) * np.exp(-((k / 1.0) ** 2))
        envelope[0] = 0.0
        comps = []
        for _ in range(2):
            z = rng.normal(size=k.size) + 1j * rng.normal(size=k.size)
            comps.append(np.fft.ifft(envelope * z).real)
        u, v = comps
    if not v_weight >= 0:
        raise ValueError("v_weight must be nonnegative")
    v = v * v_weight
    scale = max(np.max(np.abs(u)), np.max(np.abs(v)))
    return FieldPair(u * amplitude / scale, v * amplitude / scale)


def component_ratio(wave: WaveTrain) -> float:
    """Range of the v-profile over the range of the u-profile."""
    return float(np.ptp(wave.profile.v) / np.ptp(wave.profile.u))


# ---------------------------------------------------------------------------
# nonlinear simulation


@dataclass
class Trajectory:
    times: np.ndarray
    fields: list                 # FieldPair u(t) on the multi-cell grid
    wave: WaveTrain
    cells: int
    init_norm: float
    dt: float
    w0: FieldPair
    guard: float = 0.5
    stable: bool = True

    @property
    def grid(self) -> Grid:
        return Grid(self.wave.n, self.wave.period, self.cells)

    @property
    def base(self) -> FieldPair:
        return FieldPair(tile(self.wave.profile.u, self.cells), tile(self.wave.profile.v, self.cells))

    def deviation_norms(self) -> np.ndarray:
        b = self.base
        return np.array([(f - b).sup_norm() for f in self.fields])

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"no snapshot at t = {t}")
        return i

    @property
    def uniform_step(self) -> float:
        d = np.diff(self.times)
        if len(d) == 0 or np.ptp(d) > 1e-9 * d[0]:
            raise ValueError("snapshot times are not uniformly spaced")
        return float(d[0])


def simulate_nonlinear(wave: WaveTrain, w0: FieldPair, t_end: float, dt: float = 0.05,
                       snapshot_stride: int = 10, guard: float = 0.5) -> Trajectory:
    """ETDRK4 run of u_t = D u_zz + c0 u_z + F(u) from phi0 + w0 on the multi-cell grid.

    Diffusion, advection and the damping -eps*gamma*v are exact in the
    exponential integrator; the remaining reaction terms are explicit.
    Snapshots are stored every ``snapshot_stride`` steps.  The run stops and
    is flagged unstable when sup|u - phi0| exceeds ``guard``.
    """
    n = wave.n
    cells = len(w0) // n
    if cells * n != len(w0):
        raise ValueError("w0 does not live on a multi-cell grid of the wave")
    if not w0.sup_norm() < guard:
        raise ValueError("initial perturbation exceeds the blow-up guard")
    grid = Grid(n, wave.period, cells)
    p = wave.params
    k = grid.wavenumbers
    c0 = wave.speed
    symbol = np.stack([-k**2 + 1j * c0 * k, 1j * c0 * k - p.epsilon * p.gamma])

    def nonlinear(U):
        u = np.fft.ifft(U[0]).real
        v = np.fft.ifft(U[1]).real
        return np.stack([np.fft.fft(cubic(u, p.mu) - v), np.fft.fft(p.epsilon * (u - p.mu))])

    stepper = EtdRk4(symbol, dt, nonlinear)
    base = FieldPair(tile(wave.profile.u, cells), tile(wave.profile.v, cells))
    u0 = base + w0
    U = np.stack([np.fft.fft(u0.u), np.fft.fft(u0.v)])
    nsteps = steps_for(t_end, dt)
    times = [0.0]
    fields = [FieldPair(u0.u.copy(), u0.v.copy())]
    stable = True
    done = 0
    while done < nsteps:
        s = min(snapshot_stride, nsteps - done)
        U = stepper.advance(U, s)
        done += s
        f = FieldPair(np.fft.ifft(U[0]).real, np.fft.ifft(U[1]).real)
        if not np.all(np.isfinite(f.u)) or (f - base).sup_norm() > guard:
            stable = False
            break
        if s == snapshot_stride:
            times.append(done * dt)
            fields.append(f)
    return Trajectory(np.array(times), fields, wave, cells, w0.sup_norm(), dt, w0, guard, stable)


# ---------------------------------------------------------------------------
# phase modulation


@dataclass
class PhaseModulation:
    times: np.ndarray
    amplitudes: np.ndarray       # (n_times, n_xi) Bloch amplitudes of psi
    amplitudes_t: np.ndarray     # their time derivatives
    window: BlochWindow
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    relaxed: bool = False

    @property
    def c_g(self) -> float:
        return self.window.c_g

    def _field(self, A: np.ndarray, l: int) -> np.ndarray:
        return self.window.scalar_field(A, l).real

    def psi_at(self, i: int, l: int = 0) -> np.ndarray:
        """d_zeta^l psi at snapshot i."""
        return self._field(self.amplitudes[i], l)

    def psi_t_at(self, i: int, l: int = 0) -> np.ndarray:
        """d_zeta^l d_t psi at snapshot i."""
        return self._field(self.amplitudes_t[i], l)

    def psi_tilde_at(self, i: int, l: int = 0) -> np.ndarray:
        return self.psi_t_at(i, l) + self.c_g * self.psi_at(i, l + 1)

    @property
    def psi(self) -> np.ndarray:
        return np.array([self.psi_at(i) for i in range(len(self.times))])

    @property
    def psi_z(self) -> np.ndarray:
        return np.array([self.psi_at(i, 1) for i in range(len(self.times))])

    @property
    def psi_t(self) -> np.ndarray:
        return np.array([self.psi_t_at(i) for i in range(len(self.times))])

    @property
    def psi_tilde(self) -> np.ndarray:
        return np.array([self.psi_tilde_at(i) for i in range(len(self.times))])

    def sup(self, i: int, l: int = 0, kind: str = "psi") -> float:
        f = {"psi": self.psi_at, "psi_t": self.psi_t_at, "psi_tilde": self.psi_tilde_at}[kind]
        return float(np.max(np.abs(f(i, l))))

    def c_norm(self, i: int, l0: int, order: int, kind: str = "psi") -> float:
        """C^order norm of d_zeta^{l0} of the named field: max over derivatives 0..order."""
        return max(self.sup(i, l0 + j, kind) for j in range(order + 1))


def _product_weights(lam: np.ndarray, rho_w: np.ndarray, h: float, n: int, deriv: bool, nodes: int = 12):
    """Hat-function weights of the kernel K(tau) = rho chi(tau) e^{lam tau} on [j h, (j+1) h].

    Returns (P, Q) with shape (n, n_xi): P_j integrates K against the hat of
    the left node j h, Q_j against the hat of the right node (j+1) h.  With
    ``deriv`` the kernel is d_tau K = rho (chi' + lam chi) e^{lam tau}.
    """
    g, gw = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (g + 1.0)                      # nodes on [0, 1]
    gw = 0.5 * gw
    tau = (np.arange(n)[:, None] + s[None, :]) * h           # (n, nodes)
    flat = tau.ravel()
    jets = np.array([chi_derivatives(float(t), 1) for t in flat]).reshape(tau.shape + (2,))
    c, cp = jets[..., 0], jets[..., 1]
    e = np.exp(lam[None, None, :] * tau[..., None])
    if deriv:
        K = (cp[..., None] + lam[None, None, :] * c[..., None]) * e
    else:
        K = c[..., None] * e
    K = K * rho_w[None, None, :]
    P = h * np.einsum("k,jkm->jm", gw * (1 - s), K)
    Q = h * np.einsum("k,jkm->jm", gw * s, K)
    return P, Q


def _duhamel(B: np.ndarray, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """A_i = sum_{j<i} (P_j B_{i-j} + Q_j B_{i-1-j}) for all i (causal convolution per mode).

    Interval j covers tau in [j h, (j+1) h], i.e. s in [(i-j-1) h, (i-j) h],
    so only j <= i-1 contribute to A_i.  Leading kernel intervals that vanish
    identically (chi = 0 on [0, 1]) are stripped before the FFT convolution,
    so the corresponding A_i are exactly zero rather than round-off.
    """
    S, M = B.shape
    out = np.zeros((S, M), dtype=complex)
    nz = np.flatnonzero(np.any(P != 0, axis=1) | np.any(Q != 0, axis=1))
    if nz.size == 0 or nz[0] >= S - 1:
        return out
    j0 = int(nz[0])
    Pz, Qz = P[j0:], Q[j0:]
    n = S - j0
    nfft = 1 << int(np.ceil(np.log2(2 * S)))
    Bf = np.fft.fft(B, nfft, axis=0)
    conv_p = np.fft.ifft(Bf * np.fft.fft(Pz, nfft, axis=0), axis=0)[:n]
    conv_q = np.fft.ifft(Bf * np.fft.fft(Qz, nfft, axis=0), axis=0)[:n]
    # A_i vanishes for i <= j0: the sum over j0 <= j < i is empty
    out[j0 + 1:] += conv_p[1:n] - Pz[1:n] * B[0][None, :] + conv_q[:n - 1]
    return out


class _NonlinearityEvaluator:
    """Evaluates N(w, psi, psi_t) = Q + d_zeta R for snapshot fields."""

    def __init__(self, traj: Trajectory):
        self.traj = traj
        wave = traj.wave
        self.L = traj.grid.length
        self.c0 = wave.speed
        self.mu = wave.params.mu
        self.phi0 = traj.base
        d = wave.derivative(1)
        self.dphi0 = FieldPair(tile(d.u, traj.cells), tile(d.v, traj.cells))

    def inverse_modulated(self, i: int, psi: np.ndarray) -> FieldPair:
        u = self.traj.fields[i]
        return FieldPair(evaluate_displaced(u.u, self.L, psi) - self.phi0.u,
                         evaluate_displaced(u.v, self.L, psi) - self.phi0.v)

    def __call__(self, i: int, psi: np.ndarray, psi_z: np.ndarray, psi_t: np.ndarray) -> FieldPair:
        w = self.inverse_modulated(i, psi)
        p1 = self.phi0.u
        quad = (cubic(p1 + w.u, self.mu) - cubic(p1, self.mu) - cubic_d1(p1, self.mu) * w.u) * (1 - psi_z)
        w1z = spectral_derivative(w.u, self.L, 1)
        coef = self.c0 * psi_z - psi_t
        r1 = coef * w.u + (w1z + self.dphi0.u * psi_z) * psi_z / (1 - psi_z) \
            + spectral_derivative(w.u * psi_z, self.L, 1)
        r2 = coef * w.v
        return FieldPair(quad + spectral_derivative(r1, self.L, 1), spectral_derivative(r2, self.L, 1))


def _sup_bound(A: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(A), axis=-1))) if A.size else 0.0


def extract_phase(traj: Trajectory, window: BlochWindow, max_iters: int = 40, tol: float = 1e-8,
                  relaxation: float = 0.5) -> PhaseModulation:
    """Picard iteration for psi(t) = S_p(t) w0 + int_0^t S_p(t - s) N(w(s), psi(s), d_t psi(s)) ds.

    The Duhamel integral is a product trapezoid rule: the Bloch weights of N
    are interpolated linearly between snapshots and integrated exactly (to
    Gauss-Legendre accuracy) against the kernel chi(tau) e^{lambda tau}.
    d_t psi uses the differentiated kernel, not differences of psi.  The
    iteration measures successive differences by sum_m |A_m^{k+1} - A_m^k|,
    an upper bound of the sup norm; if that difference grows, the update is
    under-relaxed by ``relaxation`` from then on.
    """
    h = traj.uniform_step
    S = len(traj.times)
    lam = window.lam
    W0 = window.weights(traj.w0)
    ch0 = np.array([chi_derivatives(float(t), 1) for t in traj.times])
    e0 = np.exp(lam[None, :] * traj.times[:, None])
    base = window.rho[None, :] * ch0[:, :1] * e0 * W0[None, :]
    base_t = window.rho[None, :] * (ch0[:, 1:2] + lam[None, :] * ch0[:, :1]) * e0 * W0[None, :]
    P, Q = _product_weights(lam, window.rho, h, S, deriv=False)
    Pt, Qt = _product_weights(lam, window.rho, h, S, deriv=True)
    nl = _NonlinearityEvaluator(traj)
    modes = window.modes()

    A = base.copy()
    At = base_t.copy()
    history = []
    relaxed = False
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        B = np.zeros((S, len(lam)), dtype=complex)
        for i in range(S):
            if not np.any(A[i]) and not np.any(At[i]):
                psi = psi_z = psi_t = np.zeros(traj.grid.size)
            else:
                psi = (A[i] @ modes).real
                psi_z = ((A[i] * 1j * window.xi) @ modes).real
                psi_t = (At[i] @ modes).real
            B[i] = window.weights(nl(i, psi, psi_z, psi_t))
        A_new = base + _duhamel(B, P, Q)
        At_new = base_t + _duhamel(B, Pt, Qt)
        diff = _sup_bound(A_new - A)
        if history and diff > history[-1]:
            relaxed = True
        history.append(diff)
        if relaxed:
            A_new = relaxation * A_new + (1 - relaxation) * A
            At_new = relaxation * At_new + (1 - relaxation) * At
        A, At = A_new, At_new
        if diff < tol:
            converged = True
            break
    return PhaseModulation(traj.times.copy(), A, At, window, it, converged, history, relaxed)


def integral_equation_residual(traj: Trajectory, modulation: PhaseModulation, sample_indices) -> np.ndarray:
    """sup|psi - (S_p w0 + Duhamel integral of N)| at the requested snapshots, for the stored psi."""
    window = modulation.window
    h = traj.uniform_step
    S = len(traj.times)
    lam = window.lam
    W0 = window.weights(traj.w0)
    P, Q = _product_weights(lam, window.rho, h, S, deriv=False)
    nl = _NonlinearityEvaluator(traj)
    B = np.zeros((S, len(lam)), dtype=complex)
    last = int(max(sample_indices))
    for i in range(last + 1):
        B[i] = window.weights(nl(i, modulation.psi_at(i), modulation.psi_at(i, 1), modulation.psi_t_at(i)))
    A = _duhamel(B, P, Q)
    out = []
    for i in sample_indices:
        t = traj.times[i]
        Ai = window.rho * chi_derivatives(float(t))[0] * np.exp(lam * t) * W0 + A[i]
        out.append(float(np.max(np.abs(window.scalar_field(Ai).real - modulation.psi_at(i)))))
    return np.array(out)


# ---------------------------------------------------------------------------
# modulated perturbations


@dataclass
class ModulatedResiduals:
    times: np.ndarray
    norms: dict                  # name -> per-time sup norms
    extra: dict                  # per-time auxiliary norms (C^2 x C^1 norms, psi norms)
    traj: Trajectory = field(repr=False)
    modulation: PhaseModulation = field(repr=False)
    family: WaveFamily = field(repr=False)

    def at(self, i: int) -> dict:
        return modulated_fields(self.traj, self.modulation, self.family, i)

    def iter_fields(self, name: str):
        for i in range(len(self.times)):
            yield self.at(i)[name]


def _check_range(family: WaveFamily, k: np.ndarray) -> None:
    lo, hi = family.k_samples[0], family.k_samples[-1]
    if np.any(k < lo) or np.any(k > hi):
        raise ModulationRangeError(f"1 + psi_zeta in [{k.min():.4g}, {k.max():.4g}] leaves the family range "
                                   f"[{lo:.4g}, {hi:.4g}]")


def beta_profile(family: WaveFamily, x: np.ndarray, psi: np.ndarray, psi_z: np.ndarray, dy: int = 0, dk: int = 0):
    """d_y^dy d_k^dk phi at beta = (zeta + psi (1 + psi_z); 1 + psi_z)."""
    k = 1.0 + psi_z
    _check_range(family, k)
    return family.profile_at(k, x + psi * (1.0 + psi_z), dy=dy, dk=dk)


def modulated_fields(traj: Trajectory, modulation: PhaseModulation, family: WaveFamily, i: int) -> dict:
    """w, z, w_fwd and z_fwd at snapshot i (plus the unmodulated perturbation)."""
    L = traj.grid.length
    x = traj.grid.points
    u = traj.fields[i]
    base = traj.base
    psi = modulation.psi_at(i)
    psi_z = modulation.psi_at(i, 1)
    w = FieldPair(evaluate_displaced(u.u, L, psi) - base.u, evaluate_displaced(u.v, L, psi) - base.v)
    dk = FieldPair(tile(family.dk.u, traj.cells), tile(family.dk.v, traj.cells))
    z = w - FieldPair(dk.u * psi_z, dk.v * psi_z)
    w_fwd = u - FieldPair(evaluate_displaced(base.u, L, -psi), evaluate_displaced(base.v, L, -psi))
    z_fwd = u - beta_profile(family, x, psi, psi_z)
    return {"unmodulated": u - base, "w": w, "z": z, "w_fwd": w_fwd, "z_fwd": z_fwd}


def c2c1_norm(f: FieldPair, length: float) -> float:
    """||u||_{C^2} + ... as max over derivative orders: max(C^2 norm of u, C^1 norm of v)."""
    vals = [np.max(np.abs(f.u)), np.max(np.abs(f.v))]
    du = f.u
    dv = f.v
    for j in range(1, 3):
        du = spectral_derivative(du, length, 1)
        vals.append(np.max(np.abs(du)))
        if j == 1:
            dv = spectral_derivative(dv, length, 1)
            vals.append(np.max(np.abs(dv)))
    return float(max(vals))


def modulated_residuals(traj: Trajectory, modulation: PhaseModulation, family: WaveFamily) -> ModulatedResiduals:
    """Per-time sup norms of the four modulated perturbations and the norms used by the diagnostics."""
    names = ("unmodulated", "w", "z", "w_fwd", "z_fwd")
    norms = {n: np.zeros(len(traj.times)) for n in names}
    extra = {key: np.zeros(len(traj.times)) for key in ("z_c2c1", "z_fwd_c2c1", "z_fwd1_sup")}
    L = traj.grid.length
    for i in range(len(traj.times)):
        f = modulated_fields(traj, modulation, family, i)
        for n in names:
            norms[n][i] = f[n].sup_norm()
        extra["z_c2c1"][i] = c2c1_norm(f["z"], L)
        extra["z_fwd_c2c1"][i] = c2c1_norm(f["z_fwd"], L)
        extra["z_fwd1_sup"][i] = float(np.max(np.abs(f["z_fwd"].u)))
    return ModulatedResiduals(traj.times.copy(), norms, extra, traj, modulation, family)


# ---------------------------------------------------------------------------
# forward-modulated equation


def forward_rhs(traj: Trajectory, modulation: PhaseModulation, family: WaveFamily, i: int,
                z_fwd: FieldPair | None = None) -> FieldPair:
    """D zf_zz + c0 zf_z + F'(0) zf + Q(zf, psi) + R(psi, psi_tilde, psi_t) at snapshot i."""
    wave = traj.wave
    p = wave.params
    c0 = wave.speed
    L = traj.grid.length
    x = traj.grid.points
    m = modulation
    if z_fwd is None:
        z_fwd = modulated_fields(traj, m, family, i)["z_fwd"]
    psi = m.psi_at(i)
    pz = m.psi_at(i, 1)
    pzz = m.psi_at(i, 2)
    pzzz = m.psi_at(i, 3)
    pt = m.psi_t_at(i)
    pzt = m.psi_t_at(i, 1)
    ptil = m.psi_tilde_at(i)

    def prof(dy=0, dk=0):
        return beta_profile(family, x, psi, pz, dy, dk)

    phi = prof()
    phy = prof(1)
    phyy = prof(2)
    phk = prof(0, 1)
    phkk = prof(0, 2)
    phyk = prof(1, 1)
    z1, z2 = z_fwd.u, z_fwd.v
    a = 1 + pz * (1 + pz) + psi * pzz
    # Q: nonlinearity in z (second component vanishes)
    q1 = (phi.u * (2 + 2 * p.mu - 3 * z1) - 3 * phi.u**2 + (1 + p.mu - z1) * z1) * z1
    # R: z-independent residual
    om = family.omega_at(1.0 + pz)
    scalar_y = c0 + family.omega_d1 * pz - om - ptil + c0 * (pz**2 + psi * pzz) - pt * pz - psi * pzt
    diff_part = (phyy.u * (a**2 - (1 + pz) ** 2) + phkk.u * pzz**2 + 2 * phyk.u * pzz * a
                 + phy.u * (pzz * (1 + 3 * pz) + psi * pzzz) + phk.u * pzzz)
    r1 = diff_part + phk.u * (c0 * pzz - pzt) + phy.u * scalar_y
    r2 = phk.v * (c0 * pzz - pzt) + phy.v * scalar_y
    lin1 = spectral_derivative(z1, L, 2) + c0 * spectral_derivative(z1, L, 1) - p.mu * z1 - z2
    lin2 = c0 * spectral_derivative(z2, L, 1) + p.epsilon * z1 - p.epsilon * p.gamma * z2
    return FieldPair(lin1 + q1 + r1, lin2 + r2)


def forward_residual_check(traj: Trajectory, modulation: PhaseModulation, family: WaveFamily,
                           t_sample: float) -> float:
    """sup|d_t zf - rhs| / sup|d_t zf| at t_sample, with d_t zf by centered snapshot differences."""
    i = traj.index(t_sample)
    if i == 0 or i + 1 >= len(traj.times):
        raise SnapshotDensityError("t_sample needs a stored snapshot on each side")
    h1 = traj.times[i + 1] - traj.times[i]
    h0 = traj.times[i] - traj.times[i - 1]
    if abs(h1 - h0) > 1e-9 * h1:
        raise SnapshotDensityError("snapshots around t_sample are not equally spaced")
    zp = modulated_fields(traj, modulation, family, i + 1)["z_fwd"]
    zm = modulated_fields(traj, modulation, family, i - 1)["z_fwd"]
    zt = (zp - zm) * (1.0 / (2 * h1))
    rhs = forward_rhs(traj, modulation, family, i)
    return float((zt - rhs).sup_norm() / max(zt.sup_norm(), 1e-300))


# ---------------------------------------------------------------------------
# damping energy


def damping_window(x):
    """varrho(x) = 2 / (2 + x^2)."""
    x = np.asarray(x, dtype=float)
    return 2.0 / (2.0 + x**2)


def damping_window_derivative(x):
    x = np.asarray(x, dtype=float)
    return -4.0 * x / (2.0 + x**2) ** 2


def periodized_window(x, theta: float, length: float) -> np.ndarray:
    """sum_j varrho(theta (x + j length)) in closed form (overflow-safe)."""
    x = np.asarray(x, dtype=float)
    a = np.sqrt(2.0) / theta
    b = 2 * np.pi * a / length
    c = 2 * np.pi * x / length
    eb = np.exp(-b)
    ratio = (1.0 - eb**2) / (1.0 + eb**2 - 2.0 * eb * np.cos(c))
    return (2.0 / theta**2) * (np.pi / (a * length)) * ratio


def interpolation_coefficients(eta):
    """(a1, a2, a3) of the damping interpolation at eta in (0, 1/4)."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0) or np.any(eta >= 0.25):
        raise ValueError("eta must lie in (0, 1/4)")
    a1 = 4 * (4 - 2 * eta**3 + 9 * eta**2 + 10 * eta) / (3 * eta**2 * (1 - 4 * eta))
    a2 = 4 * (2 + 2 * eta**2 + 4 * eta) / (eta * (1 - 4 * eta))
    a3 = 4 * (5 + 4 * eta**2 + 4 * eta) / (3 * (1 - 4 * eta))
    return a1, a2, a3


def interpolation_system_defect(eta: float) -> float:
    """max_j |3/4 a_j - (eta/2) a_{j-1} - 1/2 a_{j+1} (1/eta + 1/2) - 1| with a_0 = a_4 = 0."""
    a = [0.0, *interpolation_coefficients(eta), 0.0]
    worst = 0.0
    for j in (1, 2, 3):
        val = 0.75 * a[j] - 0.5 * eta * a[j - 1] - 0.5 * a[j + 1] * (1 / eta + 0.5)
        worst = max(worst, abs(val - 1.0) / max(1.0, abs(a[j])))
    return worst


def interpolation_system_solution(eta: float) -> np.ndarray:
    """Solve the 3x3 interpolation system directly (independent route)."""
    M = np.array([
        [0.75, -0.5 * (1 / eta + 0.5), 0.0],
        [-0.5 * eta, 0.75, -0.5 * (1 / eta + 0.5)],
        [0.0, -0.5 * eta, 0.75],
    ])
    return np.linalg.solve(M, np.ones(3))


@dataclass
class DampingDiagnostics:
    window: np.ndarray
    upsilon: float
    theta: float
    offsets: np.ndarray
    times: np.ndarray
    energies: np.ndarray          # (n_times, n_offsets)
    alpha_fit: float
    interp_coeffs: object = interpolation_coefficients
    inequality_constant: float | None = None
    window_ratio_max: float = 0.0

    @property
    def sup_energy(self) -> np.ndarray:
        return self.energies.max(axis=1)


def damping_energy(z_series, times, wave: WaveTrain, cells: int, offsets=None,
                   fit_window: tuple | None = None) -> DampingDiagnostics:
    """E_y(t) = int varrho(theta (zeta + y)) (upsilon |d^3 zf_1|^2 + |d^2 zf_2|^2) d zeta for each offset y."""
    p = wave.params
    grid = Grid(wave.n, wave.period, cells)
    L = grid.length
    x = grid.points
    upsilon = p.epsilon * p.gamma / 4
    theta = 0.5 * min(1.0, p.epsilon * p.gamma / (2 * abs(wave.speed) + 1))
    offsets = np.linspace(0, L, 16, endpoint=False) if offsets is None else np.asarray(offsets, dtype=float)
    weights = np.array([periodized_window(x + y, theta, L) for y in offsets])
    energies = []
    for z in z_series:
        if len(z) != grid.size:
            raise ValueError("z does not live on the multi-cell grid")
        d3 = spectral_derivative(np.real(z.u), L, 3)
        d2 = spectral_derivative(np.real(z.v), L, 2)
        dens = upsilon * d3**2 + d2**2
        energies.append(weights @ dens * grid.spacing)
    energies = np.array(energies)
    times = np.asarray(times, dtype=float)
    sup_e = energies.max(axis=1)
    alpha = float("nan")
    sel = np.ones_like(times, dtype=bool) if fit_window is None else (times >= fit_window[0]) & (times <= fit_window[1])
    if sel.sum() >= 8 and np.all(sup_e[sel] > 0):
        alpha = fit_decay(times[sel], sup_e[sel], "exponential").rate
    xs = np.linspace(-50, 50, 20001)
    ratio = float(np.max(np.abs(damping_window_derivative(xs)) / damping_window(xs)))
    return DampingDiagnostics(damping_window(xs), upsilon, theta, offsets, times, energies, alpha,
                              window_ratio_max=ratio)


def damping_forcing(modulation: PhaseModulation, residuals: ModulatedResiduals) -> np.ndarray:
    """Per-time forcing of the damping inequality assembled from psi-norms and sup|zf_1|."""
    out = []
    for i in range(len(modulation.times)):
        m = modulation
        f = (residuals.extra["z_fwd1_sup"][i] ** 2
             + m.c_norm(i, 2, 4) ** 2
             + m.c_norm(i, 1, 3, "psi_t") ** 2
             + m.c_norm(i, 0, 3, "psi_tilde") ** 2
             + m.sup(i, 1) ** 2 * (m.sup(i, 1) ** 2 + m.sup(i, 0, "psi_t") ** 2))
        out.append(f)
    return np.array(out)


def damping_inequality_constant(diag: DampingDiagnostics, forcing: np.ndarray, rate: float) -> float:
    """Smallest C with E(t) <= e^{-rate t} E(0) + C int_0^t e^{-rate (t-s)} forcing(s) ds on the samples."""
    t = diag.times
    E = diag.sup_energy
    integ = np.zeros_like(t)
    for i in range(1, len(t)):
        s = t[: i + 1]
        integ[i] = np.trapezoid(np.exp(-rate * (t[i] - s)) * forcing[: i + 1], s)
    excess = E - np.exp(-rate * t) * E[0]
    mask = excess > 0
    if not mask.any():
        return 0.0
    if np.any(integ[mask] <= 0):
        return float("inf")
    return float(np.max(excess[mask] / integ[mask]))


# ---------------------------------------------------------------------------
# Hamilton-Jacobi comparison


@dataclass
class HamJacComparison:
    times: np.ndarray
    psi_breve: np.ndarray        # (n_times, N)
    y_breve: np.ndarray
    nu: float
    d: float
    c_g: float
    deviation: np.ndarray        # sup |psi - psi_breve|
    deviation_z: np.ndarray      # sup |d_zeta (psi - psi_breve)|
    relative: np.ndarray         # deviation / sup |psi|
    cole_hopf_residual: float


def adjoint_pairing_field(window: BlochWindow, w0: FieldPair) -> np.ndarray:
    """Pointwise conj(Phi_adj_0) . w0 with the adjoint normalized by <Phi_adj_0, phi0'> = 1."""
    cells = window.cells
    i0 = int(np.argmin(np.abs(window.xi)))
    if abs(window.xi[i0]) > 1e-14:
        raise ValueError("the Bloch window does not contain xi = 0")
    adj = window.Phi_adj[i0]
    d = window.wave.derivative(1)
    norm = (np.vdot(adj.u, d.u) + np.vdot(adj.v, d.v)) / len(d.u)
    au = tile(adj.u, cells) / np.conj(norm)
    av = tile(adj.v, cells) / np.conj(norm)
    return np.real(np.conj(au) * w0.u + np.conj(av) * w0.v)


def cole_hopf_residual(y0: np.ndarray, t: float, d: float, c_g: float, nu: float, length: float,
                       dt: float = 1e-3) -> float:
    """Relative residual of psi_t - d psi_zz + c_g psi_z - nu psi_z^2 for psi = (d/nu) log(1 + y(t)).

    d_t psi uses a fourth-order centered difference of y in time; spatial
    derivatives are spectral.
    """
    def psi_of(tt):
        y = heat_propagate(y0, tt, d, c_g, 0, length)
        return (d / nu) * np.log1p(y)

    stencil = [(-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)]
    psi_t = sum(c * psi_of(t + s * dt) for s, c in stencil) / dt
    psi = psi_of(t)
    pz = spectral_derivative(psi, length, 1)
    pzz = spectral_derivative(psi, length, 2)
    res = psi_t - d * pzz + c_g * pz - nu * pz**2
    scale = max(np.max(np.abs(psi_t)), np.max(np.abs(d * pzz)), np.max(np.abs(c_g * pz)), 1e-300)
    return float(np.max(np.abs(res)) / scale)


def hamjac_compare(w0: FieldPair, modulation: PhaseModulation, coeffs: DispersionCoefficients,
                   t_list=None, check_times=(2.0, 50.0, 200.0)) -> HamJacComparison:
    """Cole-Hopf solution of psi_t = d psi_zz - c_g psi_z + nu psi_z^2 from Phi_adj_0^* w0, compared with psi."""
    window = modulation.window
    d = coeffs.d_projection
    c_g = coeffs.c_g_fit
    nu = coeffs.nu_family
    if not d > 0:
        raise ValueError("d must be positive")
    if not all(np.isfinite([d, c_g, nu])):
        raise ValueError("coefficients must be finite")
    L = window.length
    p0 = adjoint_pairing_field(window, w0)
    times = modulation.times if t_list is None else np.asarray(t_list, dtype=float)
    if nu != 0:
        y0 = np.expm1((nu / d) * p0)
    else:
        y0 = p0
    ys, psis = [], []
    for t in times:
        y = heat_propagate(y0, float(t), d, c_g, 0, L)
        if nu != 0:
            if np.any(1 + y <= 0):
                raise ColeHopfPositivityError("1 + y_breve <= 0: reduce the perturbation amplitude E0")
            psis.append((d / nu) * np.log1p(y))
        else:
            psis.append(y)
        ys.append(y)
    psis = np.array(psis)
    dev, dev_z, rel = [], [], []
    for t, pb in zip(times, psis):
        i = int(np.argmin(np.abs(modulation.times - t)))
        psi = modulation.psi_at(i)
        diff = psi - pb
        dev.append(float(np.max(np.abs(diff))))
        dev_z.append(float(np.max(np.abs(spectral_derivative(diff, L, 1)))))
        rel.append(dev[-1] / max(float(np.max(np.abs(psi))), 1e-300))
    res = 0.0
    if nu != 0:
        for t in check_times:
            res = max(res, cole_hopf_residual(y0, t, d, c_g, nu, L))
    return HamJacComparison(np.asarray(times), psis, np.array(ys), nu, d, c_g, np.array(dev), np.array(dev_z),
                            np.array(rel), res)


# ---------------------------------------------------------------------------
# decay report


PREDICTED = {
    "u - phi0": ("power", 0.0),
    "u - phi0(. + psi)": ("power", -0.5),
    "u - phi(beta)": ("power-log", 1.0),
    "psi": ("power", 0.0),
    "psi_z": ("power", -0.5),
    "psi_t": ("power", -0.5),
    "psi_zz": ("power-log", 1.0),
    "psi - psi_breve": ("power", -0.5),
}


@dataclass
class DecayReport:
    fits: dict
    series: dict
    eta1: np.ndarray
    eta1_bounded: bool
    eta1_ratio: float
    norm_equivalence: dict

    def as_dict(self) -> dict:
        return {
            "fits": {k: v.as_dict() for k, v in self.fits.items()},
            "predicted": {k: {"model": m, "exponent": e} for k, (m, e) in PREDICTED.items()},
            "eta1_max_over_eta1_at_2": self.eta1_ratio,
            "eta1_bounded": self.eta1_bounded,
            "norm_equivalence": self.norm_equivalence,
        }


def norm_equivalence_constants(modulation: PhaseModulation, residuals: ModulatedResiduals) -> dict:
    """Smallest constants for the two norm-equivalence inequalities along the run (t > 1 samples)."""
    c_fwd, c_back = 0.0, 0.0
    for i, t in enumerate(modulation.times):
        pz2 = modulation.sup(i, 1) ** 2
        pzz_c1 = modulation.c_norm(i, 2, 1)
        pzz = modulation.sup(i, 2)
        lhs1 = residuals.extra["z_c2c1"][i]
        rhs1 = residuals.extra["z_fwd_c2c1"][i] + pzz_c1 + pz2
        lhs2 = residuals.norms["z_fwd"][i]
        rhs2 = residuals.norms["z"][i] + pzz + pz2
        if rhs1 > 0:
            c_fwd = max(c_fwd, lhs1 / rhs1)
        if rhs2 > 0:
            c_back = max(c_back, lhs2 / rhs2)
    return {"z_by_zfwd": c_fwd, "zfwd_by_z": c_back, "constant": max(c_fwd, c_back)}


def template_eta1(modulation: PhaseModulation, residuals: ModulatedResiduals, nu: float, d: float) -> np.ndarray:
    """Running sup of the eta_1 bracket with the r-terms omitted."""
    vals = []
    L = modulation.window.length
    for i, s in enumerate(modulation.times):
        psi = modulation.psi_at(i)
        y = np.expm1((nu / d) * psi) if nu != 0 else psi
        yz = spectral_derivative(y, L, 1)
        lg = np.log(2 + s)
        b = (np.max(np.abs(psi)) + np.max(np.abs(y)) + np.sqrt(s) * np.max(np.abs(yz))
             + np.sqrt(1 + s) * modulation.sup(i, 1)
             + (1 + s) / lg * (residuals.norms["z"][i] + modulation.c_norm(i, 2, 4)
                               + modulation.c_norm(i, 0, 4, "psi_tilde")))
        vals.append(b)
    return np.maximum.accumulate(np.array(vals))


def decay_report(traj: Trajectory, modulation: PhaseModulation, residuals: ModulatedResiduals,
                 comparison: HamJacComparison | None, nu: float, d: float, window=(10.0, np.inf)) -> DecayReport:
    """Fit every decay quantity against its predicted law and evaluate the template function."""
    n = len(traj.times)
    m = modulation
    series = {
        "u - phi0": residuals.norms["unmodulated"],
        "u - phi0(. + psi)": residuals.norms["w_fwd"],
        "u - phi(beta)": residuals.norms["z_fwd"],
        "psi": np.array([m.sup(i) for i in range(n)]),
        "psi_z": np.array([m.sup(i, 1) for i in range(n)]),
        "psi_t": np.array([m.sup(i, 0, "psi_t") for i in range(n)]),
        "psi_zz": np.array([m.c_norm(i, 2, 4) for i in range(n)]),
    }
    if comparison is not None:
        series["psi - psi_breve"] = comparison.deviation
    fits = {}
    lo, hi = window
    for name, vals in series.items():
        t = traj.times if name != "psi - psi_breve" else comparison.times
        sel = (t >= lo) & (t <= hi) & (vals > 0)
        if sel.sum() >= 8:
            fits[name] = fit_decay(t[sel], vals[sel], PREDICTED[name][0])
    eta1 = template_eta1(m, residuals, nu, d)
    i2 = int(np.argmin(np.abs(traj.times - 2.0)))
    ratio = float(eta1.max() / eta1[i2]) if eta1[i2] > 0 else float("inf")
    return DecayReport(fits, series, eta1, ratio <= 3.0, ratio, norm_equivalence_constants(m, residuals))
