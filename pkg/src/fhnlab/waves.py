"""Periodic wave trains of the FitzHugh-Nagumo system and their wavenumber family.

A wave train is a T-periodic profile phi with speed c solving

    k^2 D phi'' + omega phi' + F(phi) = 0

(k = 1, omega = c for the base wave).  Profiles are found by Newton's method
on a Fourier collocation grid, seeded by a transient simulation, and then
continued in the wavenumber k at fixed period.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .model import (
    FhnParams,
    FieldPair,
    Grid,
    cubic,
    cubic_d1,
    differentiation_matrix,
    inner_product,
    resample,
    shift_periodic,
    spectral_derivative,
)
from .stepper import EtdRk4, steps_for


class WaveNonconvergence(RuntimeError):
    """Newton's method did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (last residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class TrivialSolutionError(ValueError):
    """The profile is (numerically) constant, so it is not a wave train."""


class GaugeError(ValueError):
    """The translational gauge cannot be fixed because <adjoint, phi0'> vanishes."""


MIN_AMPLITUDE = 1e-2


@dataclass
class WaveTrain:
    """Sampled one-period profile (phi0), speed c0 and period T."""

    profile: FieldPair
    speed: float
    period: float
    params: FhnParams
    residual_norm: float
    iterations: int = 0

    @property
    def n(self) -> int:
        return len(self.profile)

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.period)

    @property
    def amplitude(self) -> float:
        return float(np.ptp(self.profile.u))

    def derivative(self, order: int = 1) -> FieldPair:
        return self.profile.map(lambda a: spectral_derivative(a, self.period, order))

    def resampled(self, n: int) -> "WaveTrain":
        prof = self.profile.map(lambda a: resample(a, n))
        res = profile_residual(prof, self.speed, self.period, self.params)
        return WaveTrain(prof, self.speed, self.period, self.params, res.sup_norm(), self.iterations)

    def reflected(self) -> "WaveTrain":
        """Space-reversed wave x -> -x: the profile is mirrored and the speed flips sign."""
        prof = self.profile.map(lambda a: np.roll(a[::-1], 1))
        return WaveTrain(prof, -self.speed, self.period, self.params, self.residual_norm, self.iterations)

    def as_dict(self) -> dict:
        return {
            "u": self.profile.u.tolist(),
            "v": self.profile.v.tolist(),
            "speed": self.speed,
            "period": self.period,
            "params": self.params.as_dict(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaveTrain":
        return cls(
            FieldPair(np.array(d["u"], dtype=float), np.array(d["v"], dtype=float)),
            float(d["speed"]),
            float(d["period"]),
            FhnParams(**d["params"]),
            float(d["residual_norm"]),
            int(d.get("iterations", 0)),
        )


def profile_residual(profile: FieldPair, omega: float, period: float, params: FhnParams,
                     k: float = 1.0) -> FieldPair:
    """Grid residual of k^2 D phi'' + omega phi' + F(phi) with spectral derivatives."""
    u, v = profile.u, profile.v
    uy = spectral_derivative(u, period, 1)
    uyy = spectral_derivative(u, period, 2)
    vy = spectral_derivative(v, period, 1)
    ru = k**2 * uyy + omega * uy + cubic(u, params.mu) - v
    rv = omega * vy + params.epsilon * (u - params.gamma * v - params.mu)
    return FieldPair(ru, rv)


def interpolated_residual(wave: WaveTrain, factor: int = 4) -> float:
    """Residual of the trigonometric interpolant on a grid ``factor`` times finer.

    On the collocation grid the residual is at round-off once Newton has
    converged; off the grid it measures the truncation error of the profile.
    """
    fine = wave.profile.map(lambda a: resample(a, factor * wave.n))
    return profile_residual(fine, wave.speed, wave.period, wave.params).sup_norm()


def _newton(params: FhnParams, u: np.ndarray, v: np.ndarray, omega: float, period: float,
            ref: FieldPair, k: float = 1.0, free_period: bool = False, amplitude2: float | None = None,
            tol: float = 1e-11, max_iters: int = 40):
    """Newton iteration for (u, v, omega[, period]).

    The phase is pinned by <ref', phi - ref> = 0.  With ``free_period`` the
    period is an unknown and the mean square of u - mean(u) is fixed to
    ``amplitude2``.
    """
    n = len(u)
    mu, eps, gam = params.mu, params.epsilon, params.gamma
    d1_unit = differentiation_matrix(n, 1.0)
    ref_d = np.concatenate([d1_unit @ ref.u, d1_unit @ ref.v]) / period
    ref_s = ref.stacked()
    eye = np.eye(n)
    X = np.concatenate([u, v, [omega]] + ([[period]] if free_period else []))
    m = len(X)
    res = np.inf
    for it in range(max_iters + 1):
        u, v, om = X[:n], X[n:2 * n], X[2 * n]
        L = X[2 * n + 1] if free_period else period
        d1 = d1_unit / L
        d2 = d1 @ d1
        uy, vy, uyy = d1 @ u, d1 @ v, d2 @ u
        ru = k**2 * uyy + om * uy + cubic(u, mu) - v
        rv = om * vy + eps * (u - gam * v - mu)
        rows = [ru, rv, [ref_d @ (X[:2 * n] - ref_s)]]
        if free_period:
            rows.append([np.mean((u - u.mean()) ** 2) - amplitude2])
        R = np.concatenate(rows)
        res = float(np.max(np.abs(R[:2 * n])))
        if not np.all(np.isfinite(R)):
            raise WaveNonconvergence("non-finite residual", res, it)
        if res < tol and abs(R[2 * n]) < tol:
            return u, v, om, L, res, it
        if it == max_iters:
            break
        J = np.zeros((m, m))
        J[:n, :n] = k**2 * d2 + om * d1 + np.diag(cubic_d1(u, mu))
        J[:n, n:2 * n] = -eye
        J[:n, 2 * n] = uy
        J[n:2 * n, :n] = eps * eye
        J[n:2 * n, n:2 * n] = om * d1 - eps * gam * eye
        J[n:2 * n, 2 * n] = vy
        J[2 * n, :2 * n] = ref_d
        if free_period:
            # d/dL of L^-2 and L^-1 scalings
            J[:n, -1] = -2.0 * k**2 * uyy / L - om * uy / L
            J[n:2 * n, -1] = -om * vy / L
            J[-1, :n] = 2.0 * (u - u.mean()) / n
        try:
            dX = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError as exc:
            raise WaveNonconvergence(f"singular Newton matrix ({exc})", res, it) from exc
        X = X + dX
    raise WaveNonconvergence("Newton did not converge", res, max_iters)


def solve_profile(params: FhnParams, seed: FieldPair, speed_guess: float, period: float,
                  period_mode: str = "fixed", tol: float = 1e-11, max_iters: int = 40) -> WaveTrain:
    """Converge a wave train from a seed profile.

    Parameters
    ----------
    params : FhnParams
    seed : FieldPair
        Initial profile on a uniform grid of one period (at least 32 points).
    speed_guess : float
        Initial guess for c0.
    period : float
        Period T (the initial guess when ``period_mode == "free"``).
    period_mode : {"fixed", "free"}
        In free mode the period is solved for while the mean-square amplitude
        of the u-component is held at the seed's value.

    Raises
    ------
    TrivialSolutionError
        If the seed or the converged profile is constant to within 1e-2.
    WaveNonconvergence
        If Newton fails.
    """
    if len(seed) < 32:
        raise ValueError("grid resolution must be at least 32")
    if period_mode not in ("fixed", "free"):
        raise ValueError("period_mode must be 'fixed' or 'free'")
    if np.ptp(seed.u) < MIN_AMPLITUDE:
        raise TrivialSolutionError("seed is constant; constant states are not wave trains")
    u0, v0 = np.asarray(seed.u, float), np.asarray(seed.v, float)
    free = period_mode == "free"
    amp2 = float(np.mean((u0 - u0.mean()) ** 2)) if free else None
    u, v, c, L, res, its = _newton(params, u0, v0, speed_guess, period, FieldPair(u0, v0),
                                   free_period=free, amplitude2=amp2, tol=tol, max_iters=max_iters)
    if np.ptp(u) < MIN_AMPLITUDE:
        raise TrivialSolutionError("Newton converged to a constant state")
    return WaveTrain(FieldPair(u, v), float(c), float(L), params, res, its)


# ---------------------------------------------------------------------------
# seeding by direct simulation


def simulate_cell(params: FhnParams, period: float, n: int, t_end: float, dt: float = 0.05,
                  initial: FieldPair | None = None, seed: int = 0):
    """Evolve the lab-frame system on one periodic cell with ETDRK4.

    Without an explicit initial state a front-like profile plus small random
    noise is used; it locks onto a single travelling wave much faster than
    a random start.  Returns the final state and the drift speed of the
    pattern measured from the phase of the first Fourier mode (positive for
    patterns moving to the right, matching the sign of c0 in the profile
    equation).
    """
    x = np.arange(n) * period / n
    if initial is None:
        rng = np.random.default_rng(seed)
        s = np.sin(2 * np.pi * x / period)
        initial = FieldPair(0.5 * (1 + np.tanh(5 * s)) + 1e-3 * rng.standard_normal(n),
                            0.05 * np.cos(2 * np.pi * x / period))
    kx = 2 * np.pi * np.fft.fftfreq(n, d=period / n)
    symbol = np.stack([-kx**2, np.zeros(n)])
    mu, eps, gam = params.mu, params.epsilon, params.gamma

    def nonlinear(U):
        uu = np.fft.ifft(U[0]).real
        vv = np.fft.ifft(U[1]).real
        return np.stack([np.fft.fft(cubic(uu, mu) - vv), np.fft.fft(eps * (uu - gam * vv - mu))])

    stepper = EtdRk4(symbol, dt, nonlinear)
    U = np.stack([np.fft.fft(initial.u), np.fft.fft(initial.v)])
    nsteps = steps_for(t_end, dt)
    probe = max(1, int(round(5.0 / dt)))
    U = stepper.advance(U, nsteps - probe)
    a0 = U[0][1]
    U = stepper.advance(U, probe)
    a1 = U[0][1]
    dphase = np.angle(a1 / a0)
    speed = -dphase / (2 * np.pi / period) / (probe * dt)
    state = FieldPair(np.fft.ifft(U[0]).real, np.fft.ifft(U[1]).real)
    return state, float(speed)


def find_wave(params: FhnParams, period: float, n: int = 128, t_end: float = 1500.0,
              dt: float = 0.05, seed: int = 0, tol: float = 1e-11, free_period_first: bool = True,
              negative_group_velocity: bool | None = None) -> WaveTrain:
    """Seed by simulation, converge with a free period, then pin the requested period.

    The free-period solve holds the amplitude of the simulated snapshot and
    lets the period adjust, which turns a not-quite-locked snapshot into an
    exact wave train.  That wave is then carried to ``period`` by fixed-period
    Newton solves along a straight path in T, halving the step on failure.
    """
    state, speed = simulate_cell(params, period, n, t_end, dt=dt, seed=seed)
    if np.ptp(state.u) < MIN_AMPLITUDE:
        raise TrivialSolutionError("simulation relaxed to a homogeneous state; try a longer period")
    if not free_period_first:
        return solve_profile(params, state, speed, period, "fixed", tol=tol)
    w = solve_profile(params, state, speed, period, "free", tol=tol)
    return continue_period(w, period, tol=tol)


def continue_period(wave: WaveTrain, period: float, tol: float = 1e-11, min_step: float = 1e-3) -> WaveTrain:
    """Carry a wave train to another period by fixed-period Newton continuation."""
    T, w = wave.period, wave
    step = period - T
    while abs(period - T) > 1e-14 * period:
        Tn = T + step if abs(step) < abs(period - T) else period
        try:
            w = solve_profile(wave.params, w.profile, w.speed, Tn, "fixed", tol=tol)
        except (WaveNonconvergence, TrivialSolutionError):
            step /= 2
            if abs(step) < min_step:
                raise
            continue
        T = Tn
    return w


# ---------------------------------------------------------------------------
# wavenumber family


def fd_weights(n_k: int):
    """Centered stencils on k = 1 + j h, j = -(n_k-1)/2 .. (n_k-1)/2.

    Returns dict of (offsets, weights) for the 5-point and 3-point first and
    second derivatives (weights still to be divided by h or h^2).
    """
    return {
        "d1_5": ((-2, -1, 1, 2), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
        "d2_5": ((-2, -1, 0, 1, 2), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
        "d1_3": ((-1, 1), np.array([-0.5, 0.5])),
        "d2_3": ((-1, 0, 1), np.array([1.0, -2.0, 1.0])),
    }


@dataclass
class WaveFamily:
    """Profiles phi(.;k), frequencies omega(k) and k-derivatives at k = 1."""

    wave: WaveTrain
    k_samples: np.ndarray
    profiles: list
    omega: np.ndarray
    r0: float
    dk: FieldPair
    dzk: FieldPair
    dzzk: FieldPair
    dkk: FieldPair
    omega_d1: float
    omega_d2: float
    omega_d1_3pt: float
    omega_d2_3pt: float
    gauge_shift: float = 0.0
    gauge_value: float | None = None
    _splines: dict = field(default_factory=dict, repr=False)

    @property
    def step(self) -> float:
        return float(self.k_samples[1] - self.k_samples[0])

    @property
    def center(self) -> int:
        return len(self.k_samples) // 2

    def omega_at(self, k):
        if "omega" not in self._splines:
            self._splines["omega"] = CubicSpline(self.k_samples, self.omega)
        return self._splines["omega"](k)

    def profile_at(self, k: np.ndarray, points: np.ndarray, dy: int = 0, dk: int = 0) -> FieldPair:
        """phi(points; k) with cubic interpolation in k and trigonometric interpolation in zeta.

        ``k`` and ``points`` are arrays of equal shape (one wavenumber per point).
        ``dy`` and ``dk`` select partial derivatives in the profile variable
        and in the wavenumber.
        """
        k = np.asarray(k, dtype=float)
        if np.any(k < self.k_samples[0] - 1e-14) or np.any(k > self.k_samples[-1] + 1e-14):
            raise ValueError("wavenumber outside the family range [1 - r0, 1 + r0]")
        T = self.wave.period
        n = self.wave.n
        if "coef" not in self._splines:
            cu = np.array([np.fft.fft(p.u) / n for p in self.profiles])
            cv = np.array([np.fft.fft(p.v) / n for p in self.profiles])
            self._splines["coef"] = (CubicSpline(self.k_samples, cu, axis=0),
                                     CubicSpline(self.k_samples, cv, axis=0))
        su, sv = self._splines["coef"]
        modes = np.fft.fftfreq(n, d=1.0 / n)
        modes[n // 2] = 0.0  # the Nyquist mode is dropped (negligible for resolved profiles)
        phase = np.exp(2j * np.pi * np.asarray(points)[..., None] * modes / T)
        if dy:
            phase = phase * (2j * np.pi * modes / T) ** dy
        u = np.sum(su(k, dk) * phase, axis=-1).real
        v = np.sum(sv(k, dk) * phase, axis=-1).real
        return FieldPair(u, v)

    def as_dict(self) -> dict:
        return {
            "wave": self.wave.as_dict(),
            "k_samples": self.k_samples.tolist(),
            "profiles": [[p.u.tolist(), p.v.tolist()] for p in self.profiles],
            "omega": self.omega.tolist(),
            "r0": self.r0,
            "gauge_shift": self.gauge_shift,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaveFamily":
        wave = WaveTrain.from_dict(d["wave"])
        profs = [FieldPair(np.array(u), np.array(v)) for u, v in d["profiles"]]
        return assemble_family(wave, np.array(d["k_samples"]), profs, np.array(d["omega"]),
                               float(d["r0"]), float(d.get("gauge_shift", 0.0)))


def assemble_family(wave: WaveTrain, ks: np.ndarray, profiles: list, omega: np.ndarray,
                    r0: float, gauge_shift: float = 0.0) -> WaveFamily:
    """Compute finite-difference k-derivatives from solved, phase-aligned profiles."""
    h = float(ks[1] - ks[0])
    c = len(ks) // 2
    T = wave.period
    w = fd_weights(len(ks))

    def comb(key, values, power):
        offs, wts = w[key]
        return sum(wt * values[c + o] for o, wt in zip(offs, wts)) / h**power

    us = [p.u for p in profiles]
    vs = [p.v for p in profiles]
    dk = FieldPair(comb("d1_5", us, 1), comb("d1_5", vs, 1))
    dkk = FieldPair(comb("d2_5", us, 2), comb("d2_5", vs, 2))
    dzk = dk.map(lambda a: spectral_derivative(a, T, 1))
    dzzk = dk.map(lambda a: spectral_derivative(a, T, 2))
    return WaveFamily(
        wave=wave, k_samples=np.asarray(ks), profiles=list(profiles), omega=np.asarray(omega), r0=r0,
        dk=dk, dzk=dzk, dzzk=dzzk, dkk=dkk,
        omega_d1=float(comb("d1_5", omega, 1)), omega_d2=float(comb("d2_5", omega, 2)),
        omega_d1_3pt=float(comb("d1_3", omega, 1)), omega_d2_3pt=float(comb("d2_3", omega, 2)),
        gauge_shift=gauge_shift,
    )


def _solve_at_k(wave: WaveTrain, k: float, seed: FieldPair, omega_guess: float, tol: float):
    u, v, om, _, res, _ = _newton(wave.params, seed.u, seed.v, omega_guess, wave.period,
                                  wave.profile, k=k, tol=tol)
    return FieldPair(u, v), float(om), res


def frequency_at(wave: WaveTrain, k: float, tol: float = 1e-11, guess_offset: float = 1e-3) -> float:
    """omega(k) by an independent wavenumber-parametrized Newton solve started off the known speed."""
    _, om, _ = _solve_at_k(wave, k, wave.profile, wave.speed * k * (1 + guess_offset), tol)
    return om


def continue_family(wave: WaveTrain, r0: float = 0.05, n_k: int = 5, adjoint: FieldPair | None = None,
                    tol: float = 1e-11, min_step: float = 1e-5) -> WaveFamily:
    """Continue the wave in the wavenumber on k in [1 - r0, 1 + r0].

    Every profile is phase-aligned to phi0 by <phi0', phi(.;k) - phi0> = 0.
    If ``adjoint`` (the adjoint kernel of the Bloch operator at zero,
    normalized against phi0') is supplied, the profiles are additionally
    shifted by s (k - 1) so that <adjoint, d_k phi(.;1)> = 0.
    """
    if n_k < 5 or n_k % 2 == 0:
        raise ValueError("n_k must be odd and at least 5")
    half = (n_k - 1) // 2
    h = r0 / half
    ks = 1.0 + h * np.arange(-half, half + 1)
    profiles: list = [None] * n_k
    omega = np.zeros(n_k)
    profiles[half] = wave.profile.copy()
    omega[half] = wave.speed
    for direction in (1, -1):
        prof, om, kcur = wave.profile, wave.speed, 1.0
        for j in range(1, half + 1):
            target = 1.0 + direction * j * h
            step = target - kcur
            while abs(target - kcur) > 1e-15:
                knext = kcur + step if abs(step) < abs(target - kcur) else target
                try:
                    prof_new, om_new, _ = _solve_at_k(wave, knext, prof, om, tol)
                except WaveNonconvergence:
                    step /= 2
                    if abs(step) < min_step:
                        raise
                    continue
                prof, om, kcur = prof_new, om_new, knext
            profiles[half + direction * j] = prof
            omega[half + direction * j] = om
    gauge_shift = 0.0
    if adjoint is not None:
        T = wave.period
        fam0 = assemble_family(wave, ks, profiles, omega, r0)
        norm = inner_product(adjoint, wave.derivative(1), T)
        if abs(norm) < 1e-10:
            raise GaugeError("<adjoint, phi0'> vanishes; the gauge shift is undefined")
        gauge_shift = float(-(inner_product(adjoint, fam0.dk, T) / norm).real)
        profiles = [p.map(lambda a, s=gauge_shift * (k - 1.0): shift_periodic(a, T, s))
                    for p, k in zip(profiles, ks)]
        profiles[half] = wave.profile.copy()
    fam = assemble_family(wave, ks, profiles, omega, r0, gauge_shift)
    if adjoint is not None:
        fam.gauge_value = float(abs(inner_product(adjoint, fam.dk, wave.period)))
    return fam


@dataclass
class FamilyReport:
    residuals: np.ndarray
    flagged: list
    gauge_value: float | None
    stencil_rel_d1: float
    stencil_rel_d2: float
    omega_anchor_error: float
    passed: bool


def family_consistency_check(family: WaveFamily, adjoint: FieldPair | None = None,
                             residual_tol: float = 1e-9, gauge_tol: float = 1e-8,
                             stencil_tol: float = 1e-3) -> FamilyReport:
    """Re-evaluate the profile equation for each k, the gauge and stencil agreement."""
    T = family.wave.period
    res = np.array([
        profile_residual(p, om, T, family.wave.params, k).sup_norm()
        for p, om, k in zip(family.profiles, family.omega, family.k_samples)
    ])
    flagged = [float(k) for k, r in zip(family.k_samples, res) if not r < residual_tol]
    gauge = None
    if adjoint is not None:
        gauge = float(abs(inner_product(adjoint, family.dk, T)))
    elif family.gauge_value is not None:
        gauge = family.gauge_value
    rel1 = abs(family.omega_d1 - family.omega_d1_3pt) / max(abs(family.omega_d1), 1e-300)
    rel2 = abs(family.omega_d2 - family.omega_d2_3pt) / max(abs(family.omega_d2), 1e-300)
    anchor = abs(family.omega[family.center] - family.wave.speed)
    ok = (not flagged) and (gauge is None or gauge < gauge_tol) and rel2 < stencil_tol and anchor < 1e-10
    return FamilyReport(res, flagged, gauge, float(rel1), float(rel2), float(anchor), bool(ok))
