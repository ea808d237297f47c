"""Four mutually checking effective-mass estimates.

m_formula   closed form m + (2 (2pi)^3 alpha / 3) ||k v eps^{-3/2} rhohat||^2
m_response  momentum-response bracket 2[<d1 psi, H^{-1} d1 psi> + field/3]
m_tw_fit    quadratic fit of the traveling-wave energy-velocity sweep
m_p_fit     reciprocal quadratic fit of the energy-momentum curve, where
            momentum-constrained minimizers are produced by the dual
            (velocity) parametrization: a scalar root-find on the sweep
            velocity matching the target momentum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import state as st
from .ground_state import GroundState, SolverError
from .linear_response import HessianOps
from .medium import critical_velocity
from .spectral import ScalarFieldK, ScalarFieldX, fwd_values
from .traveling_wave import SupersonicError, TravelingWave, TwOptions, scf_traveling_wave, tw_energy_sweep


class FitError(ValueError):
    pass


def fit_quadratic(xs, Es, e0: float, cubic: bool = True):
    """Least squares of E - e0 against x^2/2 (optionally with an x^3
    nuisance term).  Returns (coefficient, RMS relative misfit)."""
    xs = np.asarray(xs, dtype=float)
    Es = np.asarray(Es, dtype=float)
    if xs.size < 3:
        raise FitError("fit_quadratic needs at least 3 points")
    if np.unique(xs).size != xs.size or np.any(xs == 0.0):
        raise FitError("fit_quadratic needs distinct nonzero abscissae")
    y = Es - e0
    cols = [xs**2 / 2.0]
    if cubic:
        cols.append(xs**3)
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    scale = max(float(np.max(np.abs(y))), 1e-300)
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)) / scale)


def default_v_list(gs: GroundState, fractions=(0.02, 0.04, 0.06, 0.08)) -> list:
    """Sweep speeds: stated fractions of v_crit, capped so alpha |v| <= 1."""
    vc = critical_velocity(gs.medium)
    cap = min(1.0, 1.0 / (gs.alpha * max(fractions) * vc))
    return [f * vc * cap for f in fractions]


def mass_tw(gs: GroundState, v_list=None, opts: TwOptions | None = None,
            sweep=None):
    """Traveling-wave mass: coefficient of v^2/2 in E_v - e_alpha."""
    v_list = list(v_list) if v_list is not None else default_v_list(gs)
    if len(v_list) < 3:
        raise FitError("mass_tw needs at least 3 sweep speeds")
    if gs.alpha * max(v_list) > 1.0 + 1e-9:
        raise FitError("mass_tw sweep outside the small-velocity regime alpha |v| <= 1")
    sweep = sweep or tw_energy_sweep(gs, v_list, opts)
    coef, resid = fit_quadratic(
        [r.v for r in sweep.rows], [r.E_tw for r in sweep.rows], gs.e_alpha
    )
    return coef, resid, sweep


def minimize_at_momentum(gs: GroundState, p: float, opts: TwOptions | None = None,
                         warm: TravelingWave | None = None, m_guess: float | None = None,
                         tol_factor: float = 1e-6):
    """Momentum-constrained minimizer through the dual velocity parametrization.

    Secant iteration on speed -> P_axis(TW(speed)) - p, warm-started; the
    returned wave has axis momentum within 1e-6 max(1, |p|) of the target.
    """
    opts = opts or TwOptions()
    vc = critical_velocity(gs.medium)
    if p == 0.0:
        obs = st.observables(gs.state)
        tw = TravelingWave(
            state=gs.state, v=np.zeros(3), e_v=-gs.mu, residual_psi=gs.residual,
            residual_phi=0.0, iterations=0, E_tw=obs.G, P=obs.P,
        )
        return tw, gs.e_alpha
    if m_guess is None:
        m_guess = HessianOps(gs).closed_form_mass()
    lam = p / m_guess
    if abs(lam) >= 0.9 * vc:
        raise SupersonicError(
            f"target momentum p = {p:g} implies near-sonic velocity {lam:g} (v_crit = {vc:g})"
        )
    tol = tol_factor * max(1.0, abs(p))
    tw = scf_traveling_wave(gs, [0.0, 0.0, lam], opts, warm)
    f = float(tw.P[2]) - p
    lam_prev, f_prev = 0.0, -p
    for _ in range(25):
        if abs(f) <= tol:
            return tw, tw.E_tw
        dlam = -f * (lam - lam_prev) / (f - f_prev)
        lam_prev, f_prev = lam, f
        lam = lam + dlam
        if abs(lam) >= 0.95 * vc:
            raise SupersonicError(
                f"momentum root-find left the subsonic window (p = {p:g})"
            )
        tw = scf_traveling_wave(gs, [0.0, 0.0, lam], opts, tw)
        f = float(tw.P[2]) - p
    raise SolverError(f"momentum matching stalled at |P - p| = {abs(f):.3e}")


def mass_p(gs: GroundState, p_list, opts: TwOptions | None = None):
    """Energy-momentum mass: reciprocal of the fitted coefficient of p^2/2."""
    p_list = sorted(float(p) for p in p_list)
    if len(p_list) < 3:
        raise FitError("mass_p needs at least 3 momenta")
    Es = []
    warm = None
    m_guess = HessianOps(gs).closed_form_mass()
    waves = []
    for p in p_list:
        tw, E_p = minimize_at_momentum(gs, p, opts, warm, m_guess)
        warm = tw
        waves.append(tw)
        Es.append(E_p)
    inv_coef, resid = fit_quadratic(p_list, Es, gs.e_alpha)
    if inv_coef <= 0:
        raise FitError("energy-momentum fit produced a non-positive curvature")
    return 1.0 / inv_coef, resid, waves


def momentum_trial_state(gs: GroundState, p: float):
    """Boost-like trial pair at momentum p (upper-bound competitor).

    psi_0 ~ normalize((1 - mu_p) psi + i lam m x3 psi) via the solved
    H^{-1} d3 psi; phi_0 = phi_alpha (1 + (1 - mu_p) lam k3/eps).  The
    tilt lam is tuned by secant so the pair hits p exactly.
    """
    ops = HessianOps(gs)
    grid = gs.grid
    med = gs.medium
    sol, _ = ops.solve_H(ops.grad_psi[2], sector="Im")   # = -m x3 psi
    tilt = -sol                                          # m x3 psi
    psi_a = gs.psi.values.real
    phi_a = gs.state.phi.values
    k3 = grid.k_mesh[2]
    eps = med.eps_on(grid)
    m_eff = ops.closed_form_mass()

    def build(lam):
        mu_p = 0.5 * lam * lam  # O(lam^2) normalization bookkeeping
        vals = (1.0 - mu_p) * psi_a + 1j * lam * tilt
        vals = st.normalized(grid, vals)
        psi0 = ScalarFieldX(grid, vals)
        phi0 = ScalarFieldK(grid, phi_a * (1.0 + (1.0 - mu_p) * lam * k3 / eps))
        pol = st.PolaronState(psi=psi0, phi=phi0, medium=med, alpha=gs.alpha)
        return pol, float(st.total_momentum(pol)[2])

    lam = p / m_eff
    pol, P = build(lam)
    lam_prev, P_prev = 0.0, 0.0
    for _ in range(30):
        if abs(P - p) <= 1e-10 * max(1.0, abs(p)):
            break
        step = -(P - p) * (lam - lam_prev) / (P - P_prev)
        lam_prev, P_prev = lam, P
        lam += step
        pol, P = build(lam)
    return pol, lam, P


@dataclass
class MassReport:
    alpha: float
    m_formula: float
    m_response: float
    m_tw_fit: float
    m_p_fit: float
    tw_fit_residual: float
    p_fit_residual: float
    deviations: dict
    max_dev: float
    verdict: bool
    tol: float
    provenance: dict = field(default_factory=dict)
    failure: str = ""


def _pairwise_deviations(vals: dict) -> dict:
    names = list(vals)
    out = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            denom = 0.5 * (abs(vals[a]) + abs(vals[b]))
            out[f"{a}/{b}"] = abs(vals[a] - vals[b]) / denom
    return out


def check_ground_state_integrity(gs: GroundState, tol: float = 1e-6) -> str:
    """Broken-build canary: the stored pair must satisfy phi = -sqrt(alpha)
    sigma_psi and the Euler-Lagrange residual of the solve."""
    grid = gs.grid
    sig = st.sigma_values(grid, gs.psi.values, gs.medium)
    diff = gs.state.phi.values + np.sqrt(gs.alpha) * sig
    eps = gs.medium.eps_on(grid)
    num = np.sqrt(float(np.sum(eps * np.abs(diff) ** 2) * grid.dk**3))
    den = np.sqrt(float(np.sum(eps * np.abs(gs.state.phi.values) ** 2) * grid.dk**3))
    if num > tol * max(den, 1e-300):
        return f"field is not the minimizing field: relative defect {num / den:.3e}"
    if gs.residual > 100 * 1e-9 * abs(gs.mu) + 1e-12:
        return f"ground-state residual {gs.residual:.3e} too large"
    return ""


def mass_report(gs: GroundState, opts: TwOptions | None = None, tol: float = 0.05,
                v_list=None, p_list=None) -> MassReport:
    """Run all four estimators and grade their pairwise agreement."""
    provenance = {
        "alpha": gs.alpha,
        "medium": gs.medium.name,
        "n": gs.grid.n,
        "L": gs.grid.length,
    }
    failure = check_ground_state_integrity(gs)
    ops = HessianOps(gs)
    m_formula = ops.closed_form_mass()
    m_resp = ops.response_mass()[0]
    v_list = list(v_list) if v_list is not None else default_v_list(gs)
    if p_list is None:
        p_list = [f * m_formula * max(v_list) for f in (0.3, 0.6, 0.9)]
    tw_val = p_val = float("nan")
    tw_res = p_res = float("nan")
    if not failure:
        try:
            tw_val, tw_res, _ = mass_tw(gs, v_list, opts)
            p_val, p_res, _ = mass_p(gs, p_list, opts)
        except (SolverError, SupersonicError, FitError) as exc:
            failure = str(exc)
    vals = {
        "m_formula": m_formula,
        "m_response": m_resp,
        "m_tw_fit": tw_val,
        "m_p_fit": p_val,
    }
    devs = _pairwise_deviations({k: v for k, v in vals.items() if np.isfinite(v)})
    max_dev = max(devs.values()) if len(devs) == 6 else float("inf")
    verdict = (not failure) and np.isfinite(max_dev) and max_dev <= tol
    provenance["v_list"] = v_list
    provenance["p_list"] = p_list
    return MassReport(
        alpha=gs.alpha,
        m_formula=m_formula,
        m_response=m_resp,
        m_tw_fit=tw_val,
        m_p_fit=p_val,
        tw_fit_residual=tw_res,
        p_fit_residual=p_res,
        deviations=devs,
        max_dev=max_dev,
        verdict=verdict,
        tol=tol,
        provenance=provenance,
        failure=failure,
    )
