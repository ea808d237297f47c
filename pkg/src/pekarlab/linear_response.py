"""Matrix-free Hessian operators around a converged ground state.

H f  = (-Lap/2m + sqrt(alpha) V_{phi_alpha} - mu) f          (both sectors)
X f  = psi_alpha . (h * (psi_alpha f))                        (exchange kernel)

The imaginary-sector quadratic form is H with zero mode {psi}; the
real-sector form is H - 4 alpha X with zero modes {psi, d_j psi} (the
alpha factor is fixed by the translation zero mode: differentiating the
Euler-Lagrange equation gives H d_j psi = 4 alpha X d_j psi exactly).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from . import state as st
from .ground_state import GroundState
from .spectral import TWO_PI, fwd_values, inv_values


class LinearSolveError(RuntimeError):
    pass


@dataclass
class GapResult:
    gap_im: float
    gap_re: float
    ritz_res_im: float
    ritz_res_re: float
    gap_re_hx: float  # variant with H - alpha X instead of H - 4 alpha X


class HessianOps:
    """Closures over one ground state; all applies cost two transforms."""

    def __init__(self, gs: GroundState):
        self.gs = gs
        self.grid = gs.grid
        self.med = gs.medium
        self.alpha = gs.alpha
        self.mu = gs.mu
        self.psi = gs.psi.values.real.copy()
        grid = self.grid
        self.W = self.med.W_on(grid)
        rhoh = fwd_values(grid, self.psi**2)
        self.V_eff = -2.0 * self.alpha * TWO_PI**3 * inv_values(grid, self.W * rhoh).real
        self.k2 = grid.k_squared
        self._dx3 = grid.dx**3
        self.grad_psi = [
            inv_values(grid, 1j * grid.k_mesh[j] * fwd_values(grid, self.psi)).real
            for j in range(3)
        ]

    # sector zero modes, unnormalized
    @property
    def zero_modes_im(self):
        return [self.psi]

    @property
    def zero_modes_re(self):
        return [self.psi] + self.grad_psi

    def inner(self, a, b) -> float:
        return float(np.sum(np.conj(a) * b).real * self._dx3)

    def apply_H(self, f: np.ndarray) -> np.ndarray:
        grid = self.grid
        out = inv_values(grid, self.k2 / (2.0 * self.med.m_e) * fwd_values(grid, f))
        if np.isrealobj(f):
            out = out.real
        return out + (self.V_eff - self.mu) * f

    def apply_X(self, f: np.ndarray) -> np.ndarray:
        """(X f)(x) = psi(x) (h * (psi f))(x), alpha-free kernel."""
        grid = self.grid
        out = TWO_PI**3 * inv_values(grid, self.W * fwd_values(grid, self.psi * f))
        if np.isrealobj(f):
            out = out.real
        return self.psi * out

    def apply_re_sector(self, f: np.ndarray) -> np.ndarray:
        return self.apply_H(f) - 4.0 * self.alpha * self.apply_X(f)

    def apply_hx(self, f: np.ndarray) -> np.ndarray:
        return self.apply_H(f) - self.alpha * self.apply_X(f)

    def _modes(self, sector: str):
        modes = self.zero_modes_im if sector.lower().startswith("im") else self.zero_modes_re
        out = []
        for m in modes:
            q = m.copy()
            for p in out:
                q = q - self.inner(p, q) * p
            nrm = np.sqrt(self.inner(q, q))
            if nrm > 1e-14:
                out.append(q / nrm)
        return out

    def project_out(self, f: np.ndarray, modes) -> np.ndarray:
        for m in modes:
            f = f - (np.sum(np.conj(m) * f) * self._dx3) * m
        return f

    def sector_apply(self, sector: str):
        if sector.lower().startswith("im"):
            return self.apply_H
        return self.apply_re_sector

    # ------------------------------------------------------------------
    def solve_H(self, rhs: np.ndarray, sector: str = "Im", shift: float = 0.0,
                tol: float = 1e-8, max_iters: int = 800):
        """Projected preconditioned CG for (Op - shift) x = rhs on the
        orthogonal complement of the sector's zero modes.

        Returns (x, removed_norm): the component of rhs inside the zero-mode
        span is projected away and its norm reported.
        """
        modes = self._modes(sector)
        apply_op = self.sector_apply(sector)
        rhs0 = np.asarray(rhs)
        rhs_p = self.project_out(rhs0.copy(), modes)
        removed = float(np.sqrt(max(self.inner(rhs0, rhs0) - self.inner(rhs_p, rhs_p), 0.0)))
        rhs_norm = np.sqrt(self.inner(rhs_p, rhs_p))
        if rhs_norm <= 1e-10 * max(np.sqrt(self.inner(rhs0, rhs0)), 1e-300):
            raise LinearSolveError("solve_H: right-hand side lies entirely in the zero-mode span")

        grid = self.grid
        om = max(self.gs.oscillator.omega, 1e-6)
        mpre = 1.0 / (self.k2 / (2.0 * self.med.m_e) + 0.5 * om + abs(shift))

        def precond(f):
            out = inv_values(grid, mpre * fwd_values(grid, f))
            return out.real if np.isrealobj(f) else out

        x = np.zeros_like(rhs_p)
        r = rhs_p.copy()
        z = self.project_out(precond(r), modes)
        p = z.copy()
        rz = self.inner(r, z)
        for _ in range(max_iters):
            Ap = self.project_out(apply_op(p) - shift * p, modes)
            pAp = self.inner(p, Ap)
            if pAp <= 0:
                raise LinearSolveError(
                    f"solve_H: operator indefinite on the deflated sector (pAp = {pAp:.3e})"
                )
            a = rz / pAp
            x = x + a * p
            r = r - a * Ap
            rn = np.sqrt(self.inner(r, r))
            if rn <= tol * rhs_norm:
                return x, removed
            z = self.project_out(precond(r), modes)
            rz_new = self.inner(r, z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise LinearSolveError(f"solve_H: CG stagnation, residual {rn:.3e} after {max_iters} iterations")

    # ------------------------------------------------------------------
    def _lowest_deflated(self, sector_apply, modes, tol=1e-7, seed=0, restarts=3):
        grid = self.grid
        nflat = grid.n**3
        lift = 10.0 * max(abs(self.mu), 1.0)
        dx3 = self._dx3

        def matvec(fflat):
            f = fflat.reshape(grid.shape)
            fp = self.project_out(f.astype(float, copy=True), modes)
            out = self.project_out(sector_apply(fp), modes)
            # push the deflated span far up the spectrum
            lifted = out + lift * (f - fp)
            return lifted.reshape(nflat)

        op = LinearOperator((nflat, nflat), matvec=matvec, dtype=float)
        last_err = None
        for attempt in range(restarts):
            rng = np.random.default_rng(seed + attempt)
            v0 = self.project_out(rng.standard_normal(grid.shape), modes).reshape(nflat)
            try:
                vals, vecs = eigsh(op, k=1, which="SA", tol=tol, v0=v0, maxiter=5000)
            except Exception as exc:  # Lanczos breakdown: restart with a new seed
                last_err = exc
                continue
            lam = float(vals[0])
            vec = vecs[:, 0].reshape(grid.shape)
            vec = self.project_out(vec, modes)
            nrm = np.sqrt(self.inner(vec, vec))
            vec = vec / nrm
            resid = sector_apply(vec) - lam * vec
            resid = self.project_out(resid, modes)
            rn = float(np.sqrt(self.inner(resid, resid)))
            return lam, rn, vec
        raise LinearSolveError(f"deflated eigensolve failed after {restarts} restarts: {last_err}")

    def hessian_gaps(self, tol: float = 1e-7, seed: int = 0) -> GapResult:
        """Smallest deflated eigenvalues of the two sector forms.

        gap_im: H on {psi}^perp; gap_re: (H - 4 alpha X) on {psi, grad psi}^perp.
        The H - alpha X variant is reported alongside.
        """
        modes_im = self._modes("im")
        modes_re = self._modes("re")
        gap_im, res_im, _ = self._lowest_deflated(self.apply_H, modes_im, tol, seed)
        gap_re, res_re, _ = self._lowest_deflated(self.apply_re_sector, modes_re, tol, seed)
        gap_hx, _, _ = self._lowest_deflated(self.apply_hx, modes_re, max(tol, 1e-6), seed)
        return GapResult(gap_im=gap_im, gap_re=gap_re, ritz_res_im=res_im,
                         ritz_res_re=res_re, gap_re_hx=gap_hx)

    # ------------------------------------------------------------------
    def first_order_corrections(self, v: np.ndarray):
        """Linearized traveling-wave corrections (xi, eta) for small v.

        psi_v ~ psi + |v| xi, phi_v ~ phi_alpha + |v| eta with
        xi = -i H^{-1}(vhat . grad psi) (a Galilean phase tilt) and
        eta = (vhat . k / eps) phi_alpha.
        """
        v = np.asarray(v, dtype=float)
        speed = float(np.linalg.norm(v))
        grid = self.grid
        if speed == 0.0:
            return np.zeros(grid.shape, complex), np.zeros(grid.shape, complex)
        vhat = v / speed
        rhs = sum(vhat[j] * self.grad_psi[j] for j in range(3))
        sol, _ = self.solve_H(rhs, sector="Im")
        xi = -1j * sol
        kx, ky, kz = grid.k_mesh
        kdot = vhat[0] * kx + vhat[1] * ky + vhat[2] * kz
        phi_alpha = self.gs.state.phi.values
        eta = (kdot / self.med.eps_on(grid)) * phi_alpha
        return xi, eta

    # ------------------------------------------------------------------
    def mass_field_part(self) -> float:
        """(2 (2pi)^3 alpha / 3) || k v eps^{-3/2} rhohat ||^2, the closed-form
        field contribution; identical to twice the field term of the
        momentum-response bracket."""
        grid = self.grid
        rhoh = fwd_values(grid, self.psi**2)
        eps = self.med.eps_on(grid)
        vk = self.med.v_on(grid)
        val = np.sum(grid.k_squared * vk**2 / eps**3 * np.abs(rhoh) ** 2) * grid.dk**3
        return float(2.0 * TWO_PI**3 * self.alpha / 3.0 * val)

    def closed_form_mass(self) -> float:
        return self.med.m_e + self.mass_field_part()

    def response_mass(self, tol: float = 1e-9):
        """2 [ <d1 psi, H^{-1} d1 psi> + (1/3) || eps^{-1/2} k phi_alpha ||^2 ].

        The electron bracket equals m/2 through the commutator identity
        H (x1 psi) = -(1/m) d1 psi; the field bracket reproduces the
        closed-form field part exactly on the lattice.
        """
        grid = self.grid
        rhs = self.grad_psi[0]
        sol, _ = self.solve_H(rhs, sector="Im", tol=tol)
        electron = self.inner(rhs, sol)
        phi = self.gs.state.phi.values
        eps = self.med.eps_on(grid)
        fld = float(np.sum(grid.k_squared / eps * np.abs(phi) ** 2) * grid.dk**3) / 3.0
        return 2.0 * (electron + fld), 2.0 * electron, 2.0 * fld


def closed_form_mass(gs: GroundState) -> float:
    return HessianOps(gs).closed_form_mass()


def response_mass(gs: GroundState) -> float:
    return HessianOps(gs).response_mass()[0]
