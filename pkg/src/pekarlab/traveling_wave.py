"""Subsonic traveling waves by exact field elimination plus SCF eigen-iteration.

A profile moving at velocity v solves

    -i v.grad psi_v = (h_{sqrt(alpha) phi_v} + e_v) psi_v,
    phi_v(k) = -sqrt(alpha) sigma_{psi_v}(k) / (1 - v.k / eps(k)),

so psi_v is the lowest eigenfunction of the drift operator
T(k) - v.k + sqrt(alpha) V_{phi_v} and e_v is the negated eigenvalue.
Subsonic speeds |v| < v_crit keep the elimination denominator >=
1 - |v|/v_crit > 0 at every lattice frequency; supersonic requests are
refused rather than extrapolated.

Under the global transform convention the pair propagates as
(e^{i e_v t} psi_v(x - v t), e^{-i v.k t} phi_v(k)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import state as st
from .ground_state import GroundState, SolverError
from .medium import Medium, critical_velocity
from .spectral import Grid, ScalarFieldK, ScalarFieldX, fwd_values, inv_values


class SupersonicError(ValueError):
    pass


@dataclass
class TwOptions:
    tol: float = 1e-9              # joint residual target (absolute)
    max_outer: int = 200
    max_inner: int = 600
    mixing: float = 0.5
    inner_tol_floor: float = 1e-10


@dataclass
class TravelingWave:
    state: st.PolaronState
    v: np.ndarray
    e_v: float
    residual_psi: float
    residual_phi: float
    iterations: int
    E_tw: float
    P: np.ndarray
    phase_ok: bool = True          # e_v >= -e_alpha + v^2/4, reported not enforced
    dist_to_gs: float = 0.0


def _drift_denominator(grid: Grid, med: Medium, v: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.k_mesh
    kdotv = v[0] * kx + v[1] * ky + v[2] * kz
    return 1.0 - kdotv / med.eps_on(grid)


def _check_subsonic(med: Medium, v: np.ndarray) -> float:
    speed = float(np.linalg.norm(v))
    vc = critical_velocity(med)
    if speed >= vc:
        raise SupersonicError(
            f"|v| = {speed:g} >= v_crit = {vc:g}: traveling waves are only computed subsonically"
        )
    return vc


def eliminate_field(psi: ScalarFieldX, v, alpha: float, med: Medium) -> ScalarFieldK:
    """Exact stationary field phi_v = -sqrt(alpha) sigma_psi / (1 - v.k/eps)."""
    v = np.asarray(v, dtype=float)
    vc = _check_subsonic(med, v)
    grid = psi.grid
    denom = _drift_denominator(grid, med, v)
    dmin = float(denom.min())
    if dmin <= 0.0 or dmin < 1.0 - np.linalg.norm(v) / vc - 1e-12:
        raise SupersonicError(
            f"drift denominator violates the subsonic bound: min = {dmin:g}"
        )
    sig = st.sigma_values(grid, psi.values, med)
    return ScalarFieldK(grid, -np.sqrt(alpha) * sig / denom)


def _lowest_eig_flow(grid: Grid, med: Medium, kdotv: np.ndarray, V: np.ndarray,
                     psi0: np.ndarray, tol: float, max_iters: int):
    """Lowest eigenpair of T(k) - v.k + V by preconditioned gradient flow."""
    m_e = med.m_e
    k2 = grid.k_squared
    tmult = k2 / (2.0 * m_e) - kdotv
    dx3 = grid.dx**3
    psi = psi0 / np.sqrt(np.sum(np.abs(psi0) ** 2).real * dx3)
    tau = 0.7 / (1.0 + np.sqrt(abs(V.min()) + 1.0))
    precond = 1.0 / (1.0 + tau * k2 / (2.0 * m_e))
    lam_prev = np.inf
    lam = 0.0
    res = np.inf
    for it in range(max_iters):
        psih = fwd_values(grid, psi)
        Hpsi = inv_values(grid, tmult * psih) + V * psi
        lam = float(np.sum(np.conj(psi) * Hpsi).real * dx3)
        r = Hpsi - lam * psi
        res = float(np.sqrt(np.sum(np.abs(r) ** 2).real * dx3))
        if res <= tol:
            break
        if lam > lam_prev + 1e-13 * abs(lam_prev):
            tau *= 0.5
            precond = 1.0 / (1.0 + tau * k2 / (2.0 * m_e))
        lam_prev = lam
        psi = psi - tau * inv_values(grid, precond * fwd_values(grid, r))
        psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2).real * dx3)
    return psi, lam, res, it + 1


def _gauge_align(grid: Grid, psi: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Shift to the correlation peak against ref, phase to make <ref, psi> > 0."""
    a = ScalarFieldX(grid, ref.astype(complex))
    b = ScalarFieldX(grid, psi)
    _, y, _ = st.dist_mod_symmetry(a, b)
    out = st.shift_values(grid, psi, y)
    ov = np.sum(np.conj(ref) * out) * grid.dx**3
    return out * np.exp(-1j * np.angle(ov))


def scf_traveling_wave(gs: GroundState, v, opts: TwOptions | None = None,
                       warm: TravelingWave | None = None) -> TravelingWave:
    """Alternate field elimination and lowest-eigenpair solves until the
    joint residuals of the stationary system fall below opts.tol."""
    opts = opts or TwOptions()
    v = np.asarray(v, dtype=float)
    _check_subsonic(gs.medium, v)
    grid, med, alpha = gs.grid, gs.medium, gs.alpha
    psi_ref = gs.psi.values.real

    psi = (warm.state.psi.values if warm is not None else psi_ref.astype(complex)).copy()
    denom = _drift_denominator(grid, med, v)
    kx, ky, kz = grid.k_mesh
    kdotv = v[0] * kx + v[1] * ky + v[2] * kz
    sqa = np.sqrt(alpha)

    phi = -sqa * st.sigma_values(grid, psi, med) / denom
    beta = opts.mixing
    res_psi = res_phi = np.inf
    lam = -gs.mu
    eps = med.eps_on(grid)
    sqrt_eps = np.sqrt(eps)
    it = 0
    res_joint_prev = np.inf
    for it in range(opts.max_outer):
        V = sqa * st.potential_values(grid, phi.copy(), med)
        inner_tol = max(0.05 * min(res_psi, 1.0), opts.inner_tol_floor)
        psi, lam, res_inner, _ = _lowest_eig_flow(
            grid, med, kdotv, V, psi, inner_tol, opts.max_inner
        )
        psi = _gauge_align(grid, psi, psi_ref)
        phi_elim = -sqa * st.sigma_values(grid, psi, med) / denom
        # residual of the field line at the current pair
        diff = (1.0 - kdotv / eps) * phi + sqa * st.sigma_values(grid, psi, med)
        res_phi = float(np.sqrt(np.sum(eps * np.abs(diff) ** 2).real * grid.dk**3))
        res_psi = res_inner
        phi_new = (1.0 - beta) * phi + beta * phi_elim
        res_joint = max(res_psi, res_phi)
        if res_joint > 2.0 * res_joint_prev and beta > 0.05:
            beta *= 0.5
        res_joint_prev = res_joint
        phi = phi_new
        if res_phi <= opts.tol and res_psi <= opts.tol:
            break
    else:
        raise SolverError(
            f"traveling-wave SCF did not converge: residuals ({res_psi:.2e}, {res_phi:.2e})"
        )

    # final residual of the psi line against the final field
    V = sqa * st.potential_values(grid, phi, med)
    psih = fwd_values(grid, psi)
    Hpsi = inv_values(grid, (grid.k_squared / (2 * med.m_e) - kdotv) * psih) + V * psi
    lam = float(np.sum(np.conj(psi) * Hpsi).real * grid.dx**3)
    r = Hpsi - lam * psi
    res_psi = float(np.sqrt(np.sum(np.abs(r) ** 2).real * grid.dx**3))

    pol = st.PolaronState(
        psi=ScalarFieldX(grid, psi),
        phi=ScalarFieldK(grid, phi),
        medium=med,
        alpha=alpha,
    )
    obs = st.observables(pol)
    e_v = -lam
    speed2 = float(np.dot(v, v))
    d, _, _ = st.dist_mod_symmetry(gs.psi, pol.psi)
    return TravelingWave(
        state=pol,
        v=v,
        e_v=e_v,
        residual_psi=res_psi,
        residual_phi=res_phi,
        iterations=it + 1,
        E_tw=obs.G,
        P=obs.P,
        phase_ok=bool(e_v >= -gs.e_alpha + speed2 / 4.0 - 1e-9),
        dist_to_gs=d,
    )


def action(psi: ScalarFieldX, phi: ScalarFieldK, v, e_v: float, alpha: float,
           med: Medium) -> float:
    """J = G(psi, phi) + e_v ||psi||^2 - v . P(psi, phi).

    Stationary at traveling waves; at v = 0 with (psi_alpha, phi_alpha,
    e_v = -mu) the value is e_alpha - mu.
    """
    v = np.asarray(v, dtype=float)
    pol = st.PolaronState(psi=psi, phi=phi, medium=med, alpha=alpha)
    obs = st.observables(pol)
    nrm2 = float(np.sum(np.abs(psi.values) ** 2).real * psi.grid.dx**3)
    return obs.G + e_v * nrm2 - float(np.dot(v, obs.P))


@dataclass
class TwSweepRow:
    v: float
    E_tw: float
    e_v: float
    P_axis: float
    res_psi: float
    res_phi: float
    iters: int
    dist_to_gs: float


@dataclass
class TwSweep:
    rows: list = field(default_factory=list)
    waves: list = field(default_factory=list)


def tw_energy_sweep(gs: GroundState, v_list, opts: TwOptions | None = None) -> TwSweep:
    """Warm-started continuation along +z through increasing |v|.

    v_list entries are speeds (absolute units, not fractions); the sweep
    refuses steps larger than 0.02 v_crit by inserting intermediate
    continuation points.
    """
    opts = opts or TwOptions()
    vc = critical_velocity(gs.medium)
    speeds = sorted(float(s) for s in v_list)
    sweep = TwSweep()
    warm = None
    reached = 0.0
    step_cap = 0.025 * vc
    for target in speeds:
        while target - reached > step_cap * 1.0001:
            reached = reached + step_cap
            warm = scf_traveling_wave(gs, [0.0, 0.0, reached], opts, warm)
        tw = scf_traveling_wave(gs, [0.0, 0.0, target], opts, warm)
        warm = tw
        reached = target
        sweep.rows.append(
            TwSweepRow(
                v=target,
                E_tw=tw.E_tw,
                e_v=tw.e_v,
                P_axis=float(tw.P[2]),
                res_psi=tw.residual_psi,
                res_phi=tw.residual_phi,
                iters=tw.iterations,
                dist_to_gs=tw.dist_to_gs,
            )
        )
        sweep.waves.append(tw)
    return sweep
