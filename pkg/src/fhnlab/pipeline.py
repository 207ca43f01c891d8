"""Staged computation with content-addressed caching and a run manifest.

Stages run in dependency order.  Each stage's artifact key hashes the
configuration entries it reads plus the keys of its inputs, so a stage is
recomputed exactly when something it depends on changed.  A stage artifact
holds its scalar results, its acceptance checks and the tables later
rendered by the report.  Run-specific data (timestamps, wall times, cache
status) are kept in the manifest's ``run`` field so the rest of the manifest
is reproducible byte for byte.
"""

from __future__ import annotations

import datetime as _dt
import logging
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bloch, floquet, modulation as mod, semigroup as sg, waves
from .config import RunConfig
from .model import FieldPair, Grid
from .store import ArtifactStore, dumps

log = logging.getLogger("fhnlab")

STAGES = ("wave", "family", "spectrum", "floquet", "semigroup", "simulate", "report")
DEPENDS = {
    "wave": (),
    "family": ("wave",),
    "spectrum": ("wave", "family"),
    "floquet": ("wave", "spectrum"),
    "semigroup": ("wave", "family", "spectrum"),
    "simulate": ("wave", "family", "spectrum"),
    "report": (),
}
KEY_ITEMS = {
    "wave": ("model", "grid.period", "grid.n", "wave"),
    "family": ("family", "spectral.n_modes"),
    "spectrum": ("spectral",),
    "floquet": ("floquet",),
    "semigroup": ("semigroup", "grid.cells", "fits.window_start", "fits.semigroup_window_end"),
    "simulate": ("simulation", "grid.cells", "fits.window_start", "fits.hamjac_window_start"),
}
RUNTIME_LIMITS = {"wave": (1, 120.0), "spectrum": (2, 300.0), "semigroup": (7, 900.0)}


class StageFailure(RuntimeError):
    def __init__(self, stage: str, message: str, diagnostics: dict | None = None):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage
        self.diagnostics = diagnostics or {}


def check(check_id: str, criterion, claim: str, anchor: str, predicted: str, measured, tolerance: str,
          passed: bool) -> dict:
    """One row of the manifest's check table."""
    return {
        "id": check_id,
        "criterion": criterion,
        "claim": claim,
        "anchor": anchor,
        "predicted": predicted,
        "measured": measured,
        "tolerance": tolerance,
        "verdict": "PASS" if bool(passed) else "FAIL",
    }


def table(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def _c(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _is_decreasing_trend(t: np.ndarray, y: np.ndarray) -> tuple[bool, float]:
    slope = float(np.polyfit(np.log(t), np.log(y), 1)[0])
    return bool(slope < 0 and y[-1] < y[0]), slope


# ---------------------------------------------------------------------------
# stage context


@dataclass
class Context:
    config: RunConfig
    store: ArtifactStore
    objects: dict = field(default_factory=dict)
    keys: dict = field(default_factory=dict)
    payloads: dict = field(default_factory=dict)

    def cfg(self, section: str) -> dict:
        return self.config.section(section)


def _restore(ctx: Context, stage: str, payload: dict) -> None:
    """Rebuild the in-memory objects a downstream stage needs from a stage payload."""
    if stage == "wave":
        ctx.objects["wave"] = waves.WaveTrain.from_dict(payload["wave"])
    elif stage == "family":
        ctx.objects["family"] = waves.WaveFamily.from_dict(payload["family"])
        ctx.objects["adjoint0"] = FieldPair(np.array(payload["adjoint0"]["u"]), np.array(payload["adjoint0"]["v"]))
    elif stage == "spectrum":
        ctx.objects["curve"] = bloch.CriticalCurve.from_dict(payload["curve"])
        ctx.objects["coeffs"] = bloch.DispersionCoefficients.from_dict(payload["coefficients"])


# ---------------------------------------------------------------------------
# stages


def stage_wave(ctx: Context) -> dict:
    c = ctx.cfg("wave")
    g = ctx.cfg("grid")
    params = ctx.config.params
    w = waves.find_wave(params, g["period"], g["n"], t_end=c["seed_time"], dt=c["seed_dt"], seed=c["seed"],
                        tol=c["tol"])
    resid_fine = waves.interpolated_residual(w)
    omega1 = waves.frequency_at(w, 1.0, tol=c["tol"])
    ctx.objects["wave"] = w
    results = {"speed": w.speed, "period": w.period, "amplitude": w.amplitude, "residual_norm": w.residual_norm,
               "interpolated_residual": resid_fine, "newton_iterations": w.iterations, "omega_at_1": omega1,
               "omega_minus_speed": abs(omega1 - w.speed)}
    checks = [
        check("C1.residual", 1, "profile equation solved", "profile equation residual", "< 1e-10",
              w.residual_norm, "1e-10", w.residual_norm < 1e-10),
        check("C1.amplitude", 1, "nontrivial periodic profile", "wave amplitude", "> 1e-2", w.amplitude,
              "1e-2", w.amplitude > 1e-2),
        check("C1.omega", 1, "frequency at unit wavenumber equals the speed", "omega(1) = c0", "0",
              abs(omega1 - w.speed), "1e-10", abs(omega1 - w.speed) < 1e-10),
    ]
    x = np.arange(w.n) * w.period / w.n
    tables = {"wave_profile": table(("zeta", "u", "v"), zip(x, w.profile.u, w.profile.v))}
    return {"wave": w.as_dict(), "results": results, "checks": checks, "tables": tables}


def stage_family(ctx: Context) -> dict:
    w = ctx.objects["wave"]
    c = ctx.cfg("family")
    n_modes = ctx.cfg("spectral")["n_modes"]
    _, _, adj, _ = bloch.translational_pair(w, n_modes)
    adj_grid = adj.on_grid(w.n)
    adj_real = FieldPair(np.real(adj_grid.u), np.real(adj_grid.v))
    fam = waves.continue_family(w, r0=c["r0"], n_k=c["n_k"], adjoint=adj_grid, tol=c["tol"])
    rep = waves.family_consistency_check(fam, adj_grid)
    ctx.objects["family"] = fam
    ctx.objects["adjoint0"] = adj_real
    results = {"omega_d1": fam.omega_d1, "omega_d2": fam.omega_d2, "omega_d1_3pt": fam.omega_d1_3pt,
               "omega_d2_3pt": fam.omega_d2_3pt, "gauge_shift": fam.gauge_shift, "gauge_value": rep.gauge_value,
               "max_profile_residual": float(np.max(rep.residuals)), "stencil_rel_d2": rep.stencil_rel_d2,
               "consistent": rep.passed}
    checks = [check("family.consistency", None, "family profiles solve the profile equation",
                    "wave-train family in the wavenumber", "residuals < 1e-9, gauge < 1e-8",
                    float(np.max(rep.residuals)), "1e-9", rep.passed)]
    tables = {"family_frequency": table(("k", "omega"), zip(fam.k_samples, fam.omega))}
    return {"family": fam.as_dict(), "adjoint0": {"u": adj_real.u, "v": adj_real.v}, "results": results,
            "checks": checks, "tables": tables}


def stage_spectrum(ctx: Context) -> dict:
    w = ctx.objects["wave"]
    fam = ctx.objects["family"]
    c = ctx.cfg("spectral")
    T = w.period
    xi_grid = -np.pi / T + 2 * np.pi / T * np.arange(c["n_xi"]) / c["n_xi"]
    slices = bloch.bloch_spectrum(w, xi_grid, c["n_modes"])
    rep = bloch.verify_hypotheses(slices, speed=w.speed, zero_tol=c["zero_tol"])
    sym = bloch.symmetry_defect(slices)
    xi0 = None if c["xi0"] == "auto" else float(c["xi0"])
    curve = bloch.critical_curve(w, xi0, c["curve_points"], c["n_modes"])
    coeffs = bloch.dispersion_coefficients(curve, fam)
    ctx.objects["curve"] = curve
    ctx.objects["coeffs"] = coeffs
    lam0 = abs(curve.lam[curve.center])
    phi0 = curve.Phi[curve.center].on_grid(w.n)
    dphi = w.derivative(1)
    phi_err = float(np.max(np.abs((phi0 - dphi).stacked())) / np.max(np.abs(dphi.stacked())))
    results = {"stability": rep.as_dict(), "symmetry_defect": sym, "xi0": curve.xi0,
               "lambda_c0": lam0, "Phi0_vs_dphi": phi_err, "max_eig_residual": float(np.max(curve.eig_residuals)),
               "coefficients": coeffs.as_dict()}
    dc = coeffs
    checks = [
        check("C2.D1", 2, "spectrum in the open left half-plane except the translational zero",
              "diffusive spectral stability (D1)", "delta > 0", rep.delta, "> 0", rep.d1_pass),
        check("C2.D2", 2, "quadratic tangency of the critical curve", "diffusive spectral stability (D2)",
              "theta > 0", rep.theta, "> 0", rep.d2_pass),
        check("C2.D3", 2, "simple zero eigenvalue at xi = 0", "diffusive spectral stability (D3)",
              "simple zero", rep.zero_gap, "gap > 1e-6", rep.d3_pass),
        check("C2.lambda0", 2, "critical curve passes through 0", "lambda_c(0) = 0", "0", lam0, "1e-8",
              lam0 <= 1e-8),
        check("C2.Phi0", 2, "critical eigenfunction at 0 is the derivative of the wave", "Phi_0 = phi0'", "0",
              phi_err, "1e-6", phi_err <= 1e-6),
        check("C3.cg_family", 3, "group velocity from the curve equals omega'(1) - c0",
              "c_g = omega'(1) - c0", dc.c_g_family, dc.c_g_fit, "rel 1e-3", dc.rel_cg_fit_family < 1e-3),
        check("C3.cg_projection", 3, "group velocity from the curve equals the projection formula",
              "c_g = -2<adjoint, D phi0''> - c0", dc.c_g_projection, dc.c_g_fit, "rel 1e-3",
              dc.rel_cg_fit_projection < 1e-3),
        check("C3.d", 3, "diffusion coefficient from the curve equals the projection formula and is positive",
              "d = <adjoint, D phi0' + 2 D d_zeta d_k phi>", dc.d_projection, dc.d_fit, "rel 1e-3, d > 0",
              dc.rel_d < 1e-3 and dc.d_fit > 0),
        check("C3.nu", 3, "nonlinear coefficient from the projection formula equals the family value",
              "ν = −½ω″(1)", dc.nu_family, dc.nu_projection, "rel 1e-2", dc.rel_nu < 1e-2),
    ]
    rows = []
    for s in slices:
        for j, ev in enumerate(s.eigenvalues[:8]):
            rows.append((s.xi, j, ev.real, ev.imag))
    tables = {
        "spectrum": table(("xi", "branch", "re_lambda", "im_lambda"), rows),
        "critical_curve": table(("xi", "re_lambda", "im_lambda"), zip(curve.xi, curve.lam.real, curve.lam.imag)),
    }
    return {"curve": curve.as_dict(), "coefficients": coeffs.as_dict(), "results": results, "checks": checks,
            "tables": tables}


def stage_floquet(ctx: Context) -> dict:
    w = ctx.objects["wave"]
    curve = ctx.objects["curve"]
    coeffs = ctx.objects["coeffs"]
    c = ctx.cfg("floquet")
    n_modes = ctx.cfg("spectral")["n_modes"]
    p = w.params
    nus, err, data = floquet.nu_c_on_curve(w, curve)
    sup_err = float(np.max(err))
    p_exp, radii, rem = floquet.nu_expansion_exponent(w, coeffs.c_g_fit)
    kappa_lit, kappa_conj = [], []
    sample = sorted(set(range(0, len(curve.xi), max(1, len(curve.xi) // 8))) | {curve.center, len(curve.xi) - 1})
    idem, ranks, fdef = 0.0, [], 0.0
    for i in sample:
        r = floquet.rank_one_factors(w, curve.lam[i], data=data[i], n_modes=n_modes)
        lp = bloch.lambda_derivative(curve, i, w.speed)
        adj = curve.Phi_adj[i].on_grid(w.n)
        rhs = adj * 1j
        scale = np.max(np.abs(rhs.stacked()))
        kappa_lit.append(float(np.max(np.abs((r.Psi_adj * lp - rhs).stacked())) / scale))
        kappa_conj.append(float(np.max(np.abs((r.Psi_adj * np.conj(lp) - adj * -1j).stacked()))
                                / scale))
        idem = max(idem, r.idempotency)
        ranks.append(r.projection_rank)
        fdef = max(fdef, r.factor_defect)
    k_lit = float(max(kappa_lit))
    k_conj = float(max(kappa_conj))
    windings = sorted({int(d.winding) for d in data})
    # high-frequency split
    op = floquet.FineOperator(w, cells=c["hf_cells"], n_cell=c["hf_points"])
    g = floquet.steep_test_function(op)
    b = -p.epsilon * p.gamma / 2
    varpi0, slope_cal, history = floquet.calibrate_varpi0(op, g, b=b)
    ws = np.geomspace(varpi0, 100 * varpi0, c["hf_slope_points"])
    norms, idents = [], []
    for om in ws:
        t = floquet.hf_resolvent_split(op, b, om, g)
        norms.append(t.remainder_norm)
        idents.append(t.identity_defect)
    slope = float(np.polyfit(np.log(ws), np.log(norms), 1)[0])
    ident = float(max(idents))
    # Laplace inversion
    radii_b = [float(r) for r in c["bromwich_radii"].split()]
    brom = floquet.bromwich_convolution_check(-1.0, -2.0, 1.0, 0.5, radii_b)
    errs = [e for _, _, e in brom]
    monotone = all(b2 < b1 for b1, b2 in zip(errs, errs[1:]))
    results = {"nu_c_sup_error": sup_err, "nu_expansion_exponent": p_exp,
               "kappa_defect": k_lit, "kappa_defect_conjugate_form": k_conj,
               "projection_idempotency": idem, "projection_ranks": ranks, "factor_defect": fdef,
               "windings": windings, "varpi0": float(varpi0), "varpi0_calibration": [list(h) for h in history],
               "hf_slope": slope, "hf_identity_defect": ident, "hf_b": b,
               "bromwich_errors": errs, "bromwich_monotone": monotone}
    checks = [
        check("C4.nu_on_curve", 4, "spatial exponent on the critical curve equals i xi",
              "nu_c(lambda_c(xi)) = i xi", "0", sup_err, "1e-6", sup_err < 1e-6),
        check("C4.nu_expansion", 4, "quadratic remainder of the spatial exponent",
              "nu_c(lambda) + lambda / c_g = O(|lambda|^2)", ">= 1.9", p_exp, ">= 1.9", p_exp >= 1.9),
        check("C4.kappa", 4, "rank-one factor identity", "lambda_c'(xi) Psi_adj = i Phi_adj_xi", "0", k_lit,
              "1e-4", k_lit < 1e-4),
        check("C5.slope", 5, "high-frequency remainder decay", "|varpi|^(-3/2) remainder bound", "-1.5", slope,
              "0.2", abs(slope + 1.5) <= 0.2),
        check("C5.identity", 5, "term sum reproduces the resolvent", "I1 + I2 + I3 + I4 = resolvent", "0", ident,
              "1e-8", ident < 1e-8),
        check("C6.bromwich", 6, "inversion integral converges to the convolution",
              "Bromwich integral of a product of resolvents", "0", errs[-1], "1e-3 at largest R, monotone",
              errs[-1] < 1e-3 and monotone),
    ]
    tables = {
        "nu_on_curve": table(("xi", "abs_error"), zip(curve.xi, err)),
        "nu_expansion": table(("radius", "remainder"), zip(radii, rem)),
        "hf_remainder": table(("varpi", "sup_I4g", "identity_defect"), zip(ws, norms, idents)),
        "bromwich": table(("R", "error"), [(r, e) for r, _, e in brom]),
    }
    return {"results": results, "checks": checks, "tables": tables}


def stage_semigroup(ctx: Context) -> dict:
    w = ctx.objects["wave"]
    fam = ctx.objects["family"]
    curve = ctx.objects["curve"]
    coeffs = ctx.objects["coeffs"]
    c = ctx.cfg("semigroup")
    cells = ctx.cfg("grid")["cells"]
    fits_cfg = ctx.cfg("fits")
    lo, hi = fits_cfg["window_start"], min(fits_cfg["semigroup_window_end"], c["t_end"])
    window = sg.bloch_window(w, curve, cells, coeffs.c_g_fit)
    grid = Grid(w.n, w.period, cells)
    g = mod.synthesize_perturbation("random-bounded", 1.0, c["seed"], grid)
    t_early = [0.25, 0.5, 1.0]
    sp_early = max(float(np.max(np.abs(sg.sp_apply(window, g, t)))) for t in t_early)
    t_fit = np.round(np.geomspace(lo, hi, c["samples"]) / c["dt"]) * c["dt"]
    t_list = np.unique(np.concatenate([[0.5, 1.0, 2.0, 5.0], t_fit[t_fit > 5.0]]))
    samples = sg.semigroup_decompose(window, fam, g, t_list, dt=c["dt"])
    W = window.weights(g)
    dz = np.array([np.max(np.abs(sg.sp_apply(window, g, t, 0, 1, W))) for t in t_list])
    dt_sp = np.array([np.max(np.abs(sg.sp_apply(window, g, t, 1, 0, W))) for t in t_list])
    sr = np.array([s.residual_sr.sup_norm() for s in samples])
    se = np.array([s.residual_se.sup_norm() for s in samples])
    full = np.array([s.full.sup_norm() for s in samples])
    reasm = max(s.reassembly_defect() for s in samples)
    sel = (t_list >= lo) & (t_list <= hi)
    fits = {}
    for name, vals, model in (("dz_Sp", dz, "power"), ("transport_Sp", dt_sp, "power"), ("Sr", sr, "power"),
                              ("Se", se, "exponential")):
        try:
            fits[name] = sg.fit_decay(t_list[sel], vals[sel], model)
        except ValueError as exc:
            fits[name] = None
            log.warning("fit %s failed: %s", name, exc)

    def exp_of(name):
        f = fits[name]
        return float("nan") if f is None else f.fitted_exponent

    se_rate = float("nan") if fits["Se"] is None else fits["Se"].rate
    results = {"window_modes": int(len(window.xi)), "xi0": window.xi0, "sp_early_max": sp_early,
               "reassembly_defect": reasm, "linear_sup_growth": float(full.max()),
               "fits": {k: (None if v is None else v.as_dict()) for k, v in fits.items()}}
    checks = [
        check("C7.sp_zero", 7, "principal propagator vanishes for t <= 1", "S_p(t) = 0 on [0, 1]", "0",
              sp_early, "exact", sp_early == 0.0),
        check("C7.dz_Sp", 7, "derivative of the principal phase propagator decays", "(1+t)^(-1/2)", "-0.5",
              exp_of("dz_Sp"), "0.15", abs(exp_of("dz_Sp") + 0.5) <= 0.15),
        check("C7.transport_Sp", 7, "transported time derivative of the principal propagator decays",
              "(1+t)^(-1)", "-1.0", exp_of("transport_Sp"), "0.15", abs(exp_of("transport_Sp") + 1.0) <= 0.15),
        check("C7.Sr", 7, "critical residual part decays", "(1+t)^(-1)", "-1.0", exp_of("Sr"), "0.2",
              abs(exp_of("Sr") + 1.0) <= 0.2),
        check("C7.Se", 7, "exponentially damped part decays", "exp(-alpha t)", "alpha > 0", se_rate, "> 0",
              se_rate > 0),
        check("semigroup.reassembly", None, "decomposition parts sum to the full evolution",
              "definition of the exponential part", "0", reasm, "1e-12", reasm < 1e-12),
    ]
    tables = {"semigroup_norms": table(("t", "full", "dz_Sp", "transport_Sp", "Sr", "Se"),
                                       zip(t_list, full, dz, dt_sp, sr, se))}
    return {"results": results, "checks": checks, "tables": tables}


def _trajectory_payload(traj: mod.Trajectory, meta: dict) -> dict:
    return {"times": traj.times, "u": np.array([f.u for f in traj.fields]),
            "v": np.array([f.v for f in traj.fields]), "meta": meta}


def _linear_damping(ctx, w, fam, window, grid, vw) -> dict:
    c = ctx.cfg("simulation")
    p = w.params
    w0 = mod.synthesize_perturbation(c["kind"], c["linear_amplitude"], c["seed"], grid, vw)
    stride = 4 * c["stride"]
    traj = mod.simulate_nonlinear(w, w0, c["linear_t_end"], c["dt"], stride, c["guard"])
    m = mod.extract_phase(traj, window, c["picard_max_iters"], c["picard_tol"])
    res = mod.modulated_residuals(traj, m, fam)
    z_series = list(res.iter_fields("z_fwd"))
    lo = ctx.cfg("fits")["window_start"]
    diag = mod.damping_energy(z_series, traj.times, w, grid.cells, fit_window=(lo, c["linear_t_end"]))
    forcing = mod.damping_forcing(m, res)
    rate = p.epsilon * p.gamma / 2
    const = mod.damping_inequality_constant(diag, forcing, rate)
    normeq = mod.norm_equivalence_constants(m, res)
    return {"traj": traj, "diag": diag, "inequality_constant": const, "norm_equivalence": normeq,
            "modulation": m}


def stage_simulate(ctx: Context) -> dict:
    w = ctx.objects["wave"]
    fam = ctx.objects["family"]
    curve = ctx.objects["curve"]
    coeffs = ctx.objects["coeffs"]
    c = ctx.cfg("simulation")
    cells = ctx.cfg("grid")["cells"]
    fits_cfg = ctx.cfg("fits")
    p = w.params
    grid = Grid(w.n, w.period, cells)
    vw = mod.component_ratio(w) if c["v_weight"] == "auto" else float(c["v_weight"])
    window = sg.bloch_window(w, curve, cells, coeffs.c_g_fit)
    w0 = mod.synthesize_perturbation(c["kind"], c["amplitude"], c["seed"], grid, vw)
    traj = mod.simulate_nonlinear(w, w0, c["t_end"], c["dt"], c["stride"], c["guard"])
    if not traj.stable:
        raise StageFailure("simulate", "blow-up guard tripped", {"t_stop": float(traj.times[-1])})
    m = mod.extract_phase(traj, window, c["picard_max_iters"], c["picard_tol"])
    n = len(traj.times)
    spots = sorted({int(i) for i in np.linspace(0, n - 1, 5)})
    ie = mod.integral_equation_residual(traj, m, spots)
    res = mod.modulated_residuals(traj, m, fam)
    ham = mod.hamjac_compare(w0, m, coeffs)
    rep = mod.decay_report(traj, m, res, ham, coeffs.nu_family, coeffs.d_projection,
                           window=(fits_cfg["window_start"], c["t_end"]))
    psi_z_max = max(m.sup(i, 1) for i in range(n))
    i_half = int(np.argmin(np.abs(traj.times - 0.5)))
    psi_half = m.sup(i_half) if abs(traj.times[i_half] - 0.5) < 1e-9 else float("nan")
    # forward-modulated residual and its refinement under stride halving
    t_r = c["residual_time"]
    fwd1 = mod.forward_residual_check(traj, m, fam, t_r)
    stride2 = c["stride"] // 2
    fwd2 = float("nan")
    if stride2 >= 1 and stride2 * 2 == c["stride"]:
        traj2 = mod.simulate_nonlinear(w, w0, t_r + 4 * stride2 * c["dt"], c["dt"], stride2, c["guard"])
        m2 = mod.extract_phase(traj2, window, c["picard_max_iters"], c["picard_tol"])
        fwd2 = mod.forward_residual_check(traj2, m2, fam, t_r)
    # Hamilton-Jacobi trend
    hs = ham.times >= fits_cfg["hamjac_window_start"]
    ham_dec, ham_slope = _is_decreasing_trend(ham.times[hs], ham.relative[hs])
    # linear-regime damping run
    lin = _linear_damping(ctx, w, fam, window, grid, vw)
    diag = lin["diag"]
    rng = np.random.default_rng(c["seed"])
    etas = rng.uniform(0.0, 0.25, 20)
    etas = np.where(etas == 0.0, 0.125, etas)
    interp_def = float(max(mod.interpolation_system_defect(e) for e in etas))
    coef_pos = bool(all(np.all(np.asarray(mod.interpolation_coefficients(e)) > 0) for e in etas))
    xs = grid.points - grid.length / 2
    win_vals = mod.damping_window(xs)
    win_der = mod.damping_window_derivative(xs)
    win_ok = bool(np.all(np.abs(win_der) <= win_vals) and np.all(win_vals <= 1.0))
    upsilon_target = p.epsilon * p.gamma / 4
    normeq = max(rep.norm_equivalence["constant"], lin["norm_equivalence"]["constant"])

    def fexp(name):
        f = rep.fits.get(name)
        return float("nan") if f is None else f.fitted_exponent

    results = {
        "v_weight": vw, "init_norm": traj.init_norm, "snapshots": n, "stable": traj.stable,
        "max_deviation": float(np.max(traj.deviation_norms())),
        "picard_iterations": m.iterations, "picard_converged": m.converged,
        "picard_history": [float(h) for h in m.history], "integral_equation_residual": float(np.max(ie)),
        "psi_z_max": float(psi_z_max), "psi_at_half": psi_half,
        "decay": rep.as_dict(), "cole_hopf_residual": ham.cole_hopf_residual,
        "hamjac_relative_slope": ham_slope,
        "forward_residual": fwd1, "forward_residual_half_stride": fwd2,
        "damping_alpha": diag.alpha_fit, "damping_theta": diag.theta, "damping_upsilon": diag.upsilon,
        "damping_inequality_constant": lin["inequality_constant"], "interpolation_defect": interp_def,
        "window_ratio_max": diag.window_ratio_max,
        "norm_equivalence_main": rep.norm_equivalence, "norm_equivalence_linear": lin["norm_equivalence"],
    }
    checks = [
        check("C8.w_fwd", 8, "distance to the phase-shifted wave decays",
              "||u - phi0(. + psi)|| <= M E0 / sqrt(1+t)", "<= -0.35", fexp("u - phi0(. + psi)"), "<= -0.35",
              fexp("u - phi0(. + psi)") <= -0.35),
        check("C8.psi_z", 8, "phase gradient decays", "||psi_z|| <= M E0 / sqrt(1+t)", "-0.5", fexp("psi_z"),
              "[-0.65, -0.35]", -0.65 <= fexp("psi_z") <= -0.35),
        check("C8.z_fwd", 8, "distance to the modulated wave decays", "M E0 log(2+t) / (1+t)", "p = 1.0",
              fexp("u - phi(beta)"), "0.25", abs(fexp("u - phi(beta)") - 1.0) <= 0.25),
        check("C9.cole_hopf", 9, "Cole-Hopf solution solves the viscous Hamilton-Jacobi equation",
              "Cole-Hopf transform", "0", ham.cole_hopf_residual, "1e-6", ham.cole_hopf_residual < 1e-6),
        check("C9.trend", 9, "phase approaches the Hamilton-Jacobi solution", "||psi - psi_breve|| / ||psi||",
              "decreasing on [50, 500]", ham_slope, "log-log slope < 0 and last < first", ham_dec),
        check("C10.window", 10, "damping window inequality", "|varrho'| <= varrho <= 1", "holds",
              float(np.max(np.abs(win_der) / win_vals)), "exact", win_ok),
        check("C10.interpolation", 10, "interpolation coefficients solve their linear system",
              "coefficients (a1, a2, a3)(eta)", "0", interp_def, "1e-12", interp_def < 1e-12 and coef_pos),
        check("C10.rate", 10, "linear-regime damping energy decays", "sup_y E_y(t) decay rate",
              f">= {upsilon_target!r}", diag.alpha_fit, ">= eps gamma / 4", diag.alpha_fit >= upsilon_target),
        check("C11.residual", 11, "forward-modulated equation holds", "forward-modulated perturbation equation",
              "< 1e-2", fwd1, "1e-2", fwd1 < 1e-2),
        check("C11.halving", 11, "residual refines under stride halving", "time-differencing convergence",
              "ratio >= 2", fwd1 / fwd2 if fwd2 > 0 else float("nan"), ">= 2", fwd2 > 0 and fwd1 / fwd2 >= 2),
        check("C12.norm_equivalence", 12, "modified and inverse-modulated perturbations are equivalent",
              "norm equivalence", "C < 100", normeq, "< 100", normeq < 100),
        check("modulation.validity", None, "phase gradient stays in the modulation range", "sup |psi_z| < 1/2",
              "< 0.5", float(psi_z_max), "0.5", psi_z_max < 0.5),
        check("modulation.zero_phase", None, "phase vanishes for t <= 1", "psi(t) = 0 for t <= 1", "0",
              psi_half, "exact", psi_half == 0.0),
        check("modulation.integral_equation", None, "phase satisfies its integral equation",
              "implicit phase definition", "0", float(np.max(ie)), "1e-6", float(np.max(ie)) < 1e-6),
    ]
    tables = {
        "decay_series": table(["t"] + list(rep.series), zip(traj.times, *rep.series.values())),
        "hamjac": table(("t", "deviation", "deviation_z", "relative"),
                        zip(ham.times, ham.deviation, ham.deviation_z, ham.relative)),
        "damping_energy": table(("t", "sup_energy"), zip(diag.times, diag.sup_energy)),
        "template_eta1": table(("t", "eta1"), zip(traj.times, rep.eta1)),
    }
    traj_key = ctx.keys["simulate"] + "-trajectory"
    meta = {"cells": cells, "n": w.n, "period": w.period, "dt": c["dt"], "stride": c["stride"],
            "seed": c["seed"], "kind": c["kind"], "amplitude": c["amplitude"], "v_weight": vw,
            "params": p.as_dict()}
    ctx.store.put(traj_key, _trajectory_payload(traj, meta), fmt="npy-chunks")
    return {"results": results, "checks": checks, "tables": tables, "trajectory": traj_key}


STAGE_FUNCS = {"wave": stage_wave, "family": stage_family, "spectrum": stage_spectrum, "floquet": stage_floquet,
               "semigroup": stage_semigroup, "simulate": stage_simulate}


# ---------------------------------------------------------------------------
# driver


def expand(stages) -> list:
    """Requested stages plus their dependencies, in execution order."""
    want = set()

    def add(s):
        if s not in STAGES:
            raise ValueError(f"unknown stage {s!r}")
        for d in DEPENDS[s]:
            add(d)
        want.add(s)

    for s in stages:
        add(s)
    return [s for s in STAGES if s in want]


@dataclass
class PipelineResult:
    status: int
    manifest: dict
    manifest_path: Path | None


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_pipeline(config: RunConfig, stages, manifest_name: str = "manifest.json") -> PipelineResult:
    """Execute ``stages`` (and their dependencies) and write the manifest.

    Returns status 0 when every stage completed, 1 when a stage failed (the
    manifest then holds the completed stages and the failure diagnostics).
    Check verdicts do not affect the status; the report counts them.
    """
    order = expand(stages)
    manifest = {"config": config.as_dict(), "stages": {}, "checks": [], "failure": None,
                "run": {"started": _now(), "finished": None, "status": {}, "seconds": {}, "runtime_checks": []}}
    if not order:
        manifest["run"]["finished"] = _now()
        return PipelineResult(0, manifest, None)
    store = ArtifactStore(Path(config.output_dir) / "artifacts")
    ctx = Context(config, store)
    status = 0
    for stage in order:
        if stage == "report":
            continue
        upstream = tuple(ctx.keys[d] for d in DEPENDS[stage])
        key = config.key(stage, *KEY_ITEMS[stage], upstream=upstream)
        ctx.keys[stage] = key
        t0 = time.perf_counter()
        try:
            if key in store:
                payload = store.get(key)
                _restore(ctx, stage, payload)
                manifest["run"]["status"][stage] = "cached"
            else:
                log.info("stage %s: computing", stage)
                payload = STAGE_FUNCS[stage](ctx)
                store.put(key, payload)
                payload = store.get(key)
                manifest["run"]["status"][stage] = "computed"
                limit = RUNTIME_LIMITS.get(stage)
                if limit is not None:
                    secs = time.perf_counter() - t0
                    manifest["run"]["runtime_checks"].append(
                        check(f"C{limit[0]}.runtime", limit[0], f"{stage} stage runs at desk scale", "runtime",
                              f"< {limit[1]!r} s", secs, f"{limit[1]!r} s", secs < limit[1]))
        except Exception as exc:  # a failing stage ends the run with a partial manifest
            status = 1
            diag = getattr(exc, "diagnostics", {})
            manifest["failure"] = {"stage": stage, "error": f"{type(exc).__name__}: {exc}", "diagnostics": diag}
            manifest["run"]["traceback"] = traceback.format_exc()
            manifest["run"]["status"][stage] = "failed"
            manifest["run"]["seconds"][stage] = time.perf_counter() - t0
            log.error("stage %s failed: %s", stage, exc)
            break
        manifest["run"]["seconds"][stage] = time.perf_counter() - t0
        ctx.payloads[stage] = payload
        manifest["stages"][stage] = {"key": key, "results": payload["results"]}
        manifest["checks"].extend(payload["checks"])
    manifest["run"]["finished"] = _now()
    path = Path(config.output_dir) / manifest_name
    write_manifest(manifest, path)
    return PipelineResult(status, manifest, path)


def write_manifest(manifest: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(manifest))


def deterministic_part(manifest: dict) -> str:
    """Manifest text without the run-specific field; identical for identical configurations."""
    return dumps({k: v for k, v in manifest.items() if k != "run"})
