"""Spatial dynamics of the resolvent problem (L0 - lambda) w = g.

With psi = (u, u', v) the eigenvalue problem becomes psi' = A(zeta; lambda) psi,

    A = [[0, 1, 0],
         [lambda - f'(u0), -c0, 1],
         [-eps / c0, 0, (eps gamma + lambda) / c0]].

Its period map has multipliers of size up to exp(+-30) over one period of
the default wave, so the period map is never formed and diagonalized
directly.  Instead the period is split into m shooting segments, each with
moderate growth, and the block-cyclic matrix built from the segment maps is
diagonalized: its eigenvalues z satisfy z^m = multiplier, and its eigenvector
blocks are the periodic part of the Floquet solution at the segment nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad, solve_ivp
from scipy.sparse.linalg import LinearOperator, gmres

from .bloch import BlochField, eigenpair_at, translational_pair
from .model import FieldPair, cubic_d1, inner_product, resample
from .waves import WaveTrain


class ZeroSpeedError(ValueError):
    """The first-order reduction divides by c0 and is undefined for standing waves."""


class ExponentCollision(RuntimeError):
    """The critical spatial exponent is not separated from the others."""


class ContourPlacementError(ValueError):
    """The Bromwich line must lie to the right of both exponents."""


# ---------------------------------------------------------------------------
# first-order system


class FirstOrderSystem:
    """Coefficient matrix A(zeta; lambda) with u0 evaluated by trigonometric interpolation."""

    def __init__(self, wave: WaveTrain, lam: complex):
        if abs(wave.speed) < 1e-8:
            raise ZeroSpeedError("zero speed: the first-order reduction divides by c0")
        self.wave = wave
        self.lam = complex(lam)
        n = wave.n
        coef = np.fft.fft(wave.profile.u) / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        coef[n // 2] = 0.0
        self._coef = coef
        self._k = 2 * np.pi * k / wave.period

    def u0(self, zeta: float) -> float:
        return float(np.real(np.sum(self._coef * np.exp(1j * self._k * zeta))))

    def matrix(self, zeta: float) -> np.ndarray:
        p = self.wave.params
        c0 = self.wave.speed
        fp = cubic_d1(self.u0(zeta), p.mu)
        return np.array([
            [0.0, 1.0, 0.0],
            [self.lam - fp, -c0, 1.0],
            [-p.epsilon / c0, 0.0, (p.epsilon * p.gamma + self.lam) / c0],
        ], dtype=complex)

    def growth_bound(self, samples: int = 256) -> float:
        """Integral over one period of the largest real part of the pointwise eigenvalues of A."""
        zs = np.arange(samples) * self.wave.period / samples
        rates = [np.max(np.linalg.eigvals(self.matrix(z)).real) for z in zs]
        return float(np.mean(rates) * self.wave.period)


@dataclass
class Segment:
    start: float
    end: float
    points: np.ndarray          # sample points in [start, end)
    forward: np.ndarray         # (len(points), 3, 3) T(zeta, start)
    adjoint: np.ndarray         # (len(points), 3, 3) T_ad(zeta, start) = T(start, zeta)^*
    forward_end: np.ndarray     # T(end, start)
    adjoint_end: np.ndarray


def _propagate(system: FirstOrderSystem, start: float, end: float, points: np.ndarray,
               rtol: float, atol: float) -> Segment:
    def rhs(z, y):
        A = system.matrix(z)
        Y = y[:9].reshape(3, 3)
        Z = y[9:].reshape(3, 3)
        return np.concatenate([(A @ Y).ravel(), (-A.conj().T @ Z).ravel()])

    y0 = np.concatenate([np.eye(3, dtype=complex).ravel(), np.eye(3, dtype=complex).ravel()])
    t_eval = np.unique(np.concatenate([points, [end]]))
    sol = solve_ivp(rhs, (start, end), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
    if not sol.success:
        raise RuntimeError(f"segment integration failed: {sol.message}")
    Y = sol.y[:9].T.reshape(-1, 3, 3)
    Z = sol.y[9:].T.reshape(-1, 3, 3)
    idx = np.searchsorted(t_eval, points)
    return Segment(start, end, points, Y[idx], Z[idx], Y[-1], Z[-1])


def choose_segments(wave: WaveTrain, lam: complex = 0.0, max_growth: float = 5.0) -> int:
    """Smallest divisor m of the grid size with per-segment growth below exp(max_growth)."""
    g = FirstOrderSystem(wave, lam).growth_bound()
    need = max(1, int(np.ceil(g / max_growth)))
    for m in range(need, wave.n + 1):
        if wave.n % m == 0:
            return m
    return wave.n


# ---------------------------------------------------------------------------
# monodromy


@dataclass
class MonodromyData:
    lam: complex
    matrix: np.ndarray              # period map (product of segment maps; ill-conditioned, for reporting)
    multipliers: np.ndarray         # 3 values
    floquet_exponents: np.ndarray   # 3 principal exponents
    nu_c: complex
    root: complex                   # z with z^m = exp(T nu_c)
    segments: list
    right_nodes: np.ndarray         # (m, 3) periodic part at the nodes
    left_nodes: np.ndarray          # (m, 3) adjoint periodic part at the nodes
    residual: float                 # block-cyclic eigen-residual of the critical solution
    separation: float               # distance of nu_c from the other exponents
    condition: float                # 2-norm condition number of the period map
    winding: int = 0                # nu_c = log(multiplier) / T + 2 pi i winding / T (principal log)

    @property
    def m(self) -> int:
        return len(self.segments)

    @property
    def period(self) -> float:
        return self.segments[-1].end

    def as_dict(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "nu_c": [self.nu_c.real, self.nu_c.imag],
            "floquet_exponents": [[z.real, z.imag] for z in self.floquet_exponents],
            "multipliers": [[z.real, z.imag] for z in self.multipliers],
            "residual": self.residual,
            "separation": self.separation,
            "condition": self.condition,
            "segments": self.m,
            "winding": self.winding,
        }


def _cyclic(maps: list) -> np.ndarray:
    m = len(maps)
    Z = np.zeros((3 * m, 3 * m), dtype=complex)
    for j, Tj in enumerate(maps):
        i = (j + 1) % m
        Z[3 * i:3 * i + 3, 3 * j:3 * j + 3] = Tj
    return Z


def monodromy(wave: WaveTrain, lam: complex, anchor: complex = 0.0, segments: int | None = None,
              rtol: float = 1e-12, atol: float = 1e-14) -> MonodromyData:
    """Period map data at ``lam``; nu_c is the exponent nearest ``anchor``.

    For continuation along a path, pass the previous nu_c as ``anchor``
    (see :func:`continue_exponent`).
    """
    system = FirstOrderSystem(wave, lam)
    T = wave.period
    m = segments or choose_segments(wave, lam)
    n = wave.n
    pts = np.arange(n) * T / n
    per = n // m if n % m == 0 else None
    segs = []
    for j in range(m):
        a, b = j * T / m, (j + 1) * T / m
        sel = pts[j * per:(j + 1) * per] if per else pts[(pts >= a) & (pts < b)]
        segs.append(_propagate(system, a, b, sel, rtol, atol))
    maps = [s.forward_end for s in segs]
    Z = _cyclic(maps)
    w, vl, vr = sla.eig(Z, left=True, right=True)
    nus = (m / T) * np.log(w.astype(complex))
    i = int(np.argmin(np.abs(nus - anchor)))
    z = w[i]
    nu_c = complex(nus[i])
    x = vr[:, i].reshape(m, 3)
    y = vl[:, i].reshape(m, 3)
    res = max(np.linalg.norm(maps[j] @ x[j] - z * x[(j + 1) % m]) for j in range(m))
    res /= np.linalg.norm(x)
    # group the 3m roots into the 3 multipliers and keep the principal exponent of each
    mult_all = w**m
    exps = []
    mults = []
    for k in np.argsort(np.abs(np.angle(w))):
        cand = mult_all[k]
        if all(abs(cand - q) > 1e-8 * max(1.0, abs(q)) for q in mults):
            mults.append(cand)
            exps.append(nus[k])
        if len(mults) == 3:
            break
    # separation from the other multipliers' principal exponents
    sep = min((abs(e - nu_c) for e in exps if abs(e - nu_c) > 1e-12), default=np.inf)
    P = np.eye(3, dtype=complex)
    for Mj in maps:
        P = Mj @ P
    principal = complex(np.log(complex(z) ** m)) / T
    winding = int(np.rint((nu_c - principal).imag * T / (2 * np.pi)))
    return MonodromyData(complex(lam), P, np.array(mults), np.array(exps), nu_c, complex(z), segs, x, y,
                         float(res), float(sep), float(np.linalg.cond(P)), winding)


class BranchJump(RuntimeError):
    """The continued exponent moved by more than half the branch spacing in one step."""


def continue_exponent(wave: WaveTrain, path, segments: int | None = None) -> list:
    """nu_c along a path of lambda values starting at (or near) 0.

    Each step keeps the exponent nearest the previous one.  A step that moves
    nu_c by half the spacing 2 pi / T between log branches or more is ambiguous
    and raises :class:`BranchJump`; refine the path in that case.  The
    winding counter of every sample is recorded in its ``MonodromyData``.
    """
    out = []
    anchor = 0.0
    m = segments or choose_segments(wave)
    limit = np.pi / wave.period
    for lam in path:
        d = monodromy(wave, lam, anchor=anchor, segments=m)
        if abs(d.nu_c - anchor) >= limit:
            raise BranchJump(f"nu_c jumped from {anchor} to {d.nu_c} at lambda = {lam}; refine the path")
        out.append(d)
        anchor = d.nu_c
    return out


def nu_c_on_curve(wave: WaveTrain, curve, segments: int | None = None):
    """|nu_c(lambda_c(xi)) - i xi| over the critical-curve samples (continued outward from xi = 0)."""
    c = curve.center
    m = segments or choose_segments(wave)
    nus = np.zeros(len(curve.xi), dtype=complex)
    data = [None] * len(curve.xi)
    for direction in (1, -1):
        anchor = 0.0
        idx = range(c, len(curve.xi)) if direction == 1 else range(c, -1, -1)
        for i in idx:
            d = monodromy(wave, curve.lam[i], anchor=anchor, segments=m)
            nus[i] = d.nu_c
            data[i] = d
            anchor = d.nu_c
    return nus, np.abs(nus - 1j * curve.xi), data


def nu_expansion_exponent(wave: WaveTrain, c_g: float, radii=None, angles=None,
                          segments: int | None = None):
    """Fit |nu_c(lambda) + lambda / c_g| ~ C |lambda|^p over lambda = r e^{i theta}.

    Returns (p, radii, max over angles of the remainder per radius).
    """
    radii = np.geomspace(1e-4, 1e-2, 7) if radii is None else np.asarray(radii)
    angles = np.linspace(-np.pi / 2, np.pi / 2, 5) if angles is None else np.asarray(angles)
    m = segments or choose_segments(wave)
    rem = np.zeros(len(radii))
    for th in angles:
        anchor = 0.0
        for i, r in enumerate(radii):
            lam = r * np.exp(1j * th)
            d = monodromy(wave, lam, anchor=anchor, segments=m)
            anchor = d.nu_c
            rem[i] = max(rem[i], abs(d.nu_c + lam / c_g))
    p = np.polyfit(np.log(radii), np.log(rem), 1)[0]
    return float(p), radii, rem


# ---------------------------------------------------------------------------
# rank-one factors


@dataclass
class RankOneFactors:
    lam: complex
    nu_c: complex
    Psi: FieldPair
    Psi_adj: FieldPair
    projection: np.ndarray
    projection_rank: int
    idempotency: float
    factor_defect: float
    periodic_part: np.ndarray       # (n, 3) periodic part of the Floquet solution (unnormalized)
    adjoint_part: np.ndarray        # (n, 3) periodic part of the adjoint solution (unnormalized)
    pairing: complex                # y0^H x0

    def as_dict(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "nu_c": [self.nu_c.real, self.nu_c.imag],
            "projection_rank": self.projection_rank,
            "idempotency": self.idempotency,
            "factor_defect": self.factor_defect,
        }


def _periodic_parts(data: MonodromyData):
    nu = data.nu_c
    P, Q = [], []
    for j, s in enumerate(data.segments):
        dz = s.points - s.start
        P.append(np.exp(-nu * dz)[:, None] * (s.forward @ data.right_nodes[j]))
        Q.append(np.exp(np.conj(nu) * dz)[:, None] * (s.adjoint @ data.left_nodes[j]))
    return np.concatenate(P), np.concatenate(Q)


def rank_one_factors(wave: WaveTrain, lam: complex, anchor: complex = 0.0, n_modes: int = 64,
                     data: MonodromyData | None = None, min_separation: float = 1e-6,
                     check_points: int = 6) -> RankOneFactors:
    """T-periodic factors Psi, Psi_adj of the critical spectral projection.

    Psi = Pi2 v1 and Psi_adj = Pi3^* v2 with v1 normalized against the adjoint
    Bloch eigenfunction at the complex Floquet exponent -i nu_c(lambda),
    following the construction of the rank-one identity.
    """
    if data is None:
        data = monodromy(wave, lam, anchor=anchor)
    if data.separation < min_separation:
        raise ExponentCollision(f"nu_c = {data.nu_c} within {data.separation:.2e} of another exponent")
    T = wave.period
    c0 = wave.speed
    p, q = _periodic_parts(data)
    x0, y0 = data.right_nodes[0], data.left_nodes[0]
    pairing = complex(np.vdot(y0, x0))
    proj = np.outer(x0, np.conj(y0)) / pairing
    sv = np.linalg.svd(proj, compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * sv[0]))
    idem = float(np.linalg.norm(proj @ proj - proj))
    adj0_bf = translational_pair(wave, n_modes)[2]
    xi_c = -1j * data.nu_c
    _, _, adj_xi = eigenpair_at(wave, xi_c, n_modes, lam, adj0_bf)
    adj_grid = _bloch_on_grid(adj_xi, wave.n)
    raw = FieldPair(p[:, 0], p[:, 2])
    N1 = inner_product(adj_grid, raw, T)
    Psi = raw * (1.0 / N1)
    v2 = q * (np.conj(N1) / np.conj(pairing))
    Psi_adj = FieldPair(v2[:, 1], v2[:, 2] / c0)
    # wiring check: Psi(zeta) Psi_adj(zbar)^* against Pi2 p(zeta) q(zbar)^* Pi3 / (y0^H x0)
    rng = np.random.default_rng(0)
    ii = rng.integers(0, wave.n, size=check_points)
    jj = rng.integers(0, wave.n, size=check_points)
    pi2 = np.array([[1, 0, 0], [0, 0, 1]], dtype=complex)
    pi3 = np.array([[0, 0], [1, 0], [0, 1 / c0]], dtype=complex)
    defect = 0.0
    for a, b in zip(ii, jj):
        lhs = pi2 @ np.outer(p[a], np.conj(q[b])) @ pi3 / pairing
        rhs = np.outer([Psi.u[a], Psi.v[a]], np.conj([Psi_adj.u[b], Psi_adj.v[b]]))
        defect = max(defect, float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(lhs)), 1e-300)))
    return RankOneFactors(complex(lam), data.nu_c, Psi, Psi_adj, proj, rank, idem, defect, p, q, pairing)


def _bloch_on_grid(f: BlochField, n: int) -> FieldPair:
    return f.on_grid(n)


def align(a: FieldPair, b: FieldPair) -> tuple[float, complex]:
    """Relative sup distance between a and s * b for the least-squares scalar s."""
    va, vb = a.stacked(), b.stacked()
    s = np.vdot(vb, va) / np.vdot(vb, vb)
    return float(np.max(np.abs(va - s * vb)) / np.max(np.abs(va))), complex(s)


# ---------------------------------------------------------------------------
# high-frequency resolvent split


@dataclass
class HFResolventTerms:
    b: float
    varpi: float
    terms: list                 # I1..I4 applied to g, as FieldPairs on the multi-cell grid
    full: FieldPair
    remainder_norm: float
    identity_defect: float
    solver_info: dict


class FineOperator:
    """Pseudospectral L0 on ``cells`` copies of the wave, ``n_cell`` points per cell."""

    def __init__(self, wave: WaveTrain, cells: int = 2, n_cell: int = 1024):
        self.wave = wave
        self.cells = cells
        self.n_cell = n_cell
        self.N = cells * n_cell
        self.length = cells * wave.period
        u0 = resample(wave.profile.u, n_cell)
        self.fprime = np.tile(cubic_d1(u0, wave.params.mu), cells)
        self.k = 2 * np.pi * np.fft.fftfreq(self.N, d=self.length / self.N)

    def grid(self) -> np.ndarray:
        return np.arange(self.N) * self.length / self.N

    def symbols(self, b: float, varpi: float):
        p = self.wave.params
        lam = b + 1j * varpi
        s1 = 1.0 / (1j * varpi + self.k**2)
        s2 = 1.0 / (lam - 1j * self.wave.speed * self.k + p.epsilon * p.gamma)
        return s1, s2

    def apply_shifted(self, lam: complex, w: np.ndarray) -> np.ndarray:
        """(lam - L0) w for stacked w = (u, v)."""
        p = self.wave.params
        N = self.N
        u, v = w[:N], w[N:]
        uh, vh = np.fft.fft(u), np.fft.fft(v)
        lu = np.fft.ifft((-self.k**2 + 1j * self.wave.speed * self.k) * uh) + self.fprime * u - v
        lv = np.fft.ifft(1j * self.wave.speed * self.k * vh) + p.epsilon * u - p.epsilon * p.gamma * v
        return np.concatenate([lam * u - lu, lam * v - lv])

    def solve(self, lam: complex, g: FieldPair):
        """Full resolvent (lam - L0)^{-1} g.

        GMRES preconditioned by the exact inverse of the mean-coefficient
        operator is tried first; it converges in a handful of iterations for
        large |Im lam|.  Otherwise the dense solve below is used.
        """
        out = self._solve_iterative(lam, g)
        if out is not None:
            return out
        return self.solve_direct(lam, g)

    def _solve_iterative(self, lam: complex, g: FieldPair, tol: float = 1e-12):
        p = self.wave.params
        N = self.N
        fbar = float(np.mean(self.fprime))
        a = lam + self.k**2 - 1j * self.wave.speed * self.k - fbar
        d = lam - 1j * self.wave.speed * self.k + p.epsilon * p.gamma
        det = a * d + p.epsilon

        def prec(r):
            rh1, rh2 = np.fft.fft(r[:N]), np.fft.fft(r[N:])
            return np.concatenate([np.fft.ifft((d * rh1 - rh2) / det),
                                   np.fft.ifft((p.epsilon * rh1 + a * rh2) / det)])

        A = LinearOperator((2 * N, 2 * N), matvec=lambda w: self.apply_shifted(lam, w), dtype=complex)
        M = LinearOperator((2 * N, 2 * N), matvec=prec, dtype=complex)
        rhs = g.stacked().astype(complex)
        x, info = gmres(A, rhs, M=M, rtol=tol, atol=0.0, restart=60, maxiter=2)
        rel = float(np.linalg.norm(self.apply_shifted(lam, x) - rhs) / np.linalg.norm(rhs))
        if not np.isfinite(rel) or rel > 1e-10:
            return None
        return FieldPair(x[:N], x[N:]), {"residual": rel, "method": "gmres"}

    def solve_direct(self, lam: complex, g: FieldPair):
        """Full resolvent (lam - L0)^{-1} g by a direct Bloch-decomposed solve.

        The multi-cell field splits into ``cells`` Bloch components, each
        T-periodic after removing exp(i xi zeta).  In each component v is
        eliminated through its Fourier symbol, leaving a dense linear system
        for u on one cell.
        """
        p = self.wave.params
        n, cells, T = self.n_cell, self.cells, self.wave.period
        c0, eps, gam = self.wave.speed, p.epsilon, p.gamma
        zeta = np.arange(n) * T / n
        kap = 2 * np.pi * np.fft.fftfreq(n, d=T / n)
        fp = self.fprime[:n]
        G1 = np.asarray(g.u, dtype=complex).reshape(cells, n)
        G2 = np.asarray(g.v, dtype=complex).reshape(cells, n)
        U = np.zeros((cells, n), dtype=complex)
        V = np.zeros((cells, n), dtype=complex)
        eye = np.eye(n)
        resid = 0.0
        for q in range(cells):
            xi = 2 * np.pi * q / (cells * T)
            phase = np.exp(-1j * xi * (np.arange(cells)[:, None] * T + zeta[None, :]))
            g1 = np.mean(G1 * phase, axis=0)
            g2 = np.mean(G2 * phase, axis=0)
            kx = kap + xi
            s2 = 1.0 / (lam - 1j * c0 * kx + eps * gam)
            a = lam + kx**2 - 1j * c0 * kx + eps * s2
            M = np.fft.ifft(a[:, None] * np.fft.fft(eye, axis=0), axis=0) - np.diag(fp)
            rhs = g1 - np.fft.ifft(s2 * np.fft.fft(g2))
            u = np.linalg.solve(M, rhs)
            v = np.fft.ifft(s2 * np.fft.fft(g2 + eps * u))
            resid = max(resid, float(np.linalg.norm(M @ u - rhs) / max(np.linalg.norm(rhs), 1e-300)))
            back = np.conj(phase)
            U += back * u[None, :]
            V += back * v[None, :]
        full = FieldPair(U.ravel(), V.ravel())
        check = self.apply_shifted(lam, full.stacked())
        rel = float(np.linalg.norm(check - np.concatenate([g.u, g.v])) / np.linalg.norm(np.concatenate([g.u, g.v])))
        if not np.isfinite(rel) or rel > 1e-8:
            raise RuntimeError(f"resolvent solve failed near the spectrum (residual {rel:.2e})")
        return full, {"residual": rel, "block_residual": resid, "method": "direct"}


def hf_terms(op: FineOperator, b: float, varpi: float, g: FieldPair, literal_sign: bool = False):
    """I1, I2, I3 by Fourier-symbol division.

    The Neumann expansion of (lam - L0)^{-1} around the decoupled
    operators gives I2 = (-R1 R2 g2, +eps R2 R1 g1); ``literal_sign`` flips
    both signs for comparison with the opposite-sign reading.
    """
    s1, s2 = op.symbols(b, varpi)
    F, iF = np.fft.fft, np.fft.ifft
    g1, g2 = F(g.u), F(g.v)
    eps = op.wave.params.epsilon
    sgn = -1.0 if literal_sign else 1.0
    I1 = FieldPair(iF(s1 * g1), iF(s2 * g2))
    I2 = FieldPair(-sgn * iF(s1 * s2 * g2), sgn * eps * iF(s2 * s1 * g1))
    I3 = FieldPair(np.zeros(op.N, dtype=complex), -eps * iF(s2 * s1 * s2 * g2))
    return I1, I2, I3


def hf_resolvent_split(op: FineOperator, b: float, varpi: float, g: FieldPair,
                       literal_sign: bool = False) -> HFResolventTerms:
    """Split (b + i varpi - L0)^{-1} g into I1 + I2 + I3 + I4 (I4 is the remainder)."""
    full, info = op.solve(b + 1j * varpi, g)
    I1, I2, I3 = hf_terms(op, b, varpi, g, literal_sign)
    I4 = full - I1 - I2 - I3
    total = I1 + I2 + I3 + I4
    ident = float(np.max(np.abs((total - full).stacked())) / max(np.max(np.abs(full.stacked())), 1e-300))
    return HFResolventTerms(b, varpi, [I1, I2, I3, I4], full, I4.sup_norm(), ident, info)


def steep_test_function(op: FineOperator, sharpness: float = 0.02) -> FieldPair:
    """Bounded, uniformly continuous test data with steep transitions.

    The high-frequency remainder bound is attained by data varying on
    scales below |varpi|^{-1/2}; smooth data decay faster.  Both components
    are near-step profiles of width ``sharpness`` (in units of length).
    """
    x = op.grid()
    L = op.length
    s = np.sin(2 * np.pi * x / L * op.cells) + 0.3 * np.sin(6 * np.pi * x / L * op.cells + 1.0)
    g1 = np.tanh(s / (sharpness * 2 * np.pi / op.wave.period))
    g2 = np.tanh(np.cos(2 * np.pi * x / L * op.cells) / (sharpness * 2 * np.pi / op.wave.period))
    return FieldPair(g1 / np.max(np.abs(g1)), g2 / np.max(np.abs(g2)))


def remainder_slope(op: FineOperator, g: FieldPair, varpi0: float, b: float = 0.0, points: int = 9,
                    literal_sign: bool = False):
    """Log-log slope of ||I4 g|| over varpi in [varpi0, 100 varpi0]."""
    ws = np.geomspace(varpi0, 100 * varpi0, points)
    norms = np.array([hf_resolvent_split(op, b, w, g, literal_sign).remainder_norm for w in ws])
    slope = float(np.polyfit(np.log(ws), np.log(norms), 1)[0])
    return slope, ws, norms


def calibrate_varpi0(op: FineOperator, g: FieldPair, b: float = 0.0, target: float = -1.5,
                     band: float = 0.2, max_doublings: int = 8):
    """Scan varpi0 upward from 10/T (doubling) until the remainder slope is in the band."""
    w0 = 10.0 / op.wave.period
    history = []
    for _ in range(max_doublings + 1):
        slope, ws, norms = remainder_slope(op, g, w0, b)
        history.append((w0, slope))
        if abs(slope - target) <= band:
            return w0, slope, history
        w0 *= 2
    return w0 / 2, history[-1][1], history


# ---------------------------------------------------------------------------
# Laplace inversion of a convolution


def convolution_closed_form(a: complex, b: complex, t: float) -> complex:
    """int_0^t e^{b s} e^{a (t - s)} ds."""
    if abs(a - b) < 1e-14:
        return t * np.exp(a * t)
    return (np.exp(a * t) - np.exp(b * t)) / (a - b)


def bromwich_convolution_check(a: complex, b: complex, t: float, omega: float, R_list):
    """Truncated inversion integral of 1/((lam - b)(lam - a)) on [omega - iR, omega + iR].

    Returns a list of (R, value, |value - closed form|).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if not omega > max(np.real(a), np.real(b)):
        raise ContourPlacementError("omega must exceed the real parts of both exponents")
    exact = convolution_closed_form(a, b, t)

    def integrand(y, part):
        lam = omega + 1j * y
        val = np.exp(lam * t) / ((lam - b) * (lam - a)) / (2 * np.pi)
        return val.real if part == 0 else val.imag

    rows = []
    for R in R_list:
        re = quad(integrand, -R, R, args=(0,), limit=2000, epsabs=1e-13, epsrel=1e-12)[0]
        im = quad(integrand, -R, R, args=(1,), limit=2000, epsabs=1e-13, epsrel=1e-12)[0]
        val = re + 1j * im
        rows.append((float(R), complex(val), float(abs(val - exact))))
    return rows
