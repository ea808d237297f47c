"""Polaron configuration (psi, phi) and its observables.

psi lives on the position lattice and is L2-normalized; phi is stored in
frequency space exclusively.  The total energy of a pair is

    G(psi, phi) = <psi| -Lap/2m |psi> + sqrt(alpha) int V_phi |psi|^2
                  + int eps |phi|^2 dk,
    V_phi(x)    = 2 Re int e^{ik.x} v(k) phi(k) dk,

and eliminating the field at its minimizer phi = -sqrt(alpha) sigma_psi,
sigma_psi = (2 pi)^{3/2} (v/eps) rhohat_psi, gives the reduced functional

    E(psi) = <psi| -Lap/2m |psi> - alpha (2 pi)^3 int W |rhohat_psi|^2 dk.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .medium import Medium
from .spectral import (
    TWO_PI,
    Grid,
    ScalarFieldK,
    ScalarFieldX,
    fwd_values,
    inv_values,
)

_SQ2PI3 = TWO_PI**1.5  # (2 pi)^{3/2}


@dataclass
class PolaronState:
    psi: ScalarFieldX
    phi: ScalarFieldK
    medium: Medium
    alpha: float

    def __post_init__(self):
        if self.psi.grid != self.phi.grid:
            raise ValueError("psi and phi live on different grids")
        if not (np.all(np.isfinite(self.psi.values)) and np.all(np.isfinite(self.phi.values))):
            raise ValueError("polaron state contains non-finite samples")

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    def check_normalized(self, tol: float = 1e-10):
        nrm = self.psi.norm()
        if abs(nrm - 1.0) > tol:
            raise ValueError(f"psi norm {nrm} deviates from 1 beyond {tol}")


class EnergyE(NamedTuple):
    total: float
    kinetic: float
    interaction: float


@dataclass
class Observables:
    G: float
    E_reduced: float
    kinetic: float
    coupling_energy: float
    field_energy: float
    P: np.ndarray
    mu: float


def normalized(grid: Grid, values: np.ndarray) -> np.ndarray:
    nrm = np.sqrt(np.sum(np.abs(values) ** 2).real * grid.dx**3)
    return values / nrm


def density_hat(grid: Grid, psi_values: np.ndarray) -> np.ndarray:
    rho = (psi_values.real**2 + psi_values.imag**2) if np.iscomplexobj(psi_values) else psi_values**2
    return fwd_values(grid, rho)


def sigma_values(grid: Grid, psi_values: np.ndarray, med: Medium) -> np.ndarray:
    """sigma_psi(k) = (2 pi)^{3/2} (v/eps)(k) rhohat_psi(k)."""
    return _SQ2PI3 * (med.v_on(grid) / med.eps_on(grid)) * density_hat(grid, psi_values)


def sigma(psi: ScalarFieldX, med: Medium) -> ScalarFieldK:
    return ScalarFieldK(psi.grid, sigma_values(psi.grid, psi.values, med))


def potential_values(grid: Grid, phi_values: np.ndarray, med: Medium) -> np.ndarray:
    """V_phi(x) = 2 Re int e^{ik.x} v(k) phi(k) dk, a real position field."""
    return 2.0 * _SQ2PI3 * inv_values(grid, med.v_on(grid) * phi_values).real


def potential(phi: ScalarFieldK, med: Medium) -> ScalarFieldX:
    return ScalarFieldX(phi.grid, potential_values(phi.grid, phi.values, med).astype(complex))


def minimizing_field(psi: ScalarFieldX, alpha: float, med: Medium) -> ScalarFieldK:
    """Field minimizer phi = -sqrt(alpha) sigma_psi of G at fixed psi."""
    return ScalarFieldK(psi.grid, -np.sqrt(alpha) * sigma_values(psi.grid, psi.values, med))


def kinetic_energy(grid: Grid, psi_values: np.ndarray, m_e: float) -> float:
    psih = fwd_values(grid, psi_values)
    return float(np.sum(grid.k_squared * np.abs(psih) ** 2) * grid.dk**3 / (2.0 * m_e))


def energy_E(psi: ScalarFieldX, alpha: float, med: Medium) -> EnergyE:
    """Reduced energy and its two summands (kinetic, interaction)."""
    grid = psi.grid
    kin = kinetic_energy(grid, psi.values, med.m_e)
    rhoh = density_hat(grid, psi.values)
    inter = -alpha * TWO_PI**3 * float(np.sum(med.W_on(grid) * np.abs(rhoh) ** 2) * grid.dk**3)
    return EnergyE(total=kin + inter, kinetic=kin, interaction=inter)


def energy_G(s: PolaronState, alpha: float | None = None) -> float:
    return observables(s, alpha).G


def field_norm_sq(grid: Grid, phi_values: np.ndarray, med: Medium) -> float:
    """|| sqrt(eps) phi ||^2 on the frequency lattice."""
    return float(np.sum(med.eps_on(grid) * np.abs(phi_values) ** 2) * grid.dk**3)


def observables(s: PolaronState, alpha: float | None = None) -> Observables:
    alpha = s.alpha if alpha is None else alpha
    grid = s.grid
    med = s.medium
    kin = kinetic_energy(grid, s.psi.values, med.m_e)
    V = potential_values(grid, s.phi.values, med)
    rho = np.abs(s.psi.values) ** 2
    coupling = np.sqrt(alpha) * float(np.sum(V * rho) * grid.dx**3)
    fld = field_norm_sq(grid, s.phi.values, med)
    eE = energy_E(s.psi, alpha, med)
    return Observables(
        G=kin + coupling + fld,
        E_reduced=eE.total,
        kinetic=kin,
        coupling_energy=coupling,
        field_energy=fld,
        P=total_momentum(s),
        mu=kin + 2.0 * eE.interaction,
    )


def lagrange_multiplier(psi: ScalarFieldX, alpha: float, med: Medium) -> float:
    """mu = <psi, h_{sqrt(alpha) phi_psi} psi>: kinetic plus doubled interaction."""
    eE = energy_E(psi, alpha, med)
    return eE.kinetic + 2.0 * eE.interaction


def total_momentum(s: PolaronState) -> np.ndarray:
    """P_j = int k_j (|psihat|^2 + |phi|^2) dk, real 3-vector."""
    grid = s.grid
    psih = fwd_values(grid, s.psi.values)
    dens = np.abs(psih) ** 2 + np.abs(s.phi.values) ** 2
    w = grid.dk**3
    return np.array([float(np.sum(grid.k_mesh[j] * dens) * w) for j in range(3)])


def electron_momentum(grid: Grid, psi_values: np.ndarray) -> np.ndarray:
    psih = fwd_values(grid, psi_values)
    dens = np.abs(psih) ** 2
    w = grid.dk**3
    return np.array([float(np.sum(grid.k_mesh[j] * dens) * w) for j in range(3)])


# ---------------------------------------------------------------------------
# symmetry-reduced distance


def _parabolic_peak(fm1: float, f0: float, fp1: float) -> float:
    """Sub-lattice offset of the extremum of a log-parabola through 3 samples."""
    a, b, c = np.log(max(fm1, 1e-300)), np.log(max(f0, 1e-300)), np.log(max(fp1, 1e-300))
    denom = a - 2 * b + c
    if denom >= 0 or abs(denom) < 1e-300:
        return 0.0
    off = 0.5 * (a - c) / denom
    return float(np.clip(off, -0.5, 0.5))


def dist_mod_symmetry(a: ScalarFieldX, b: ScalarFieldX):
    """Minimal || e^{i theta} a(. - y) - b || over shifts and phases.

    The shift search runs over lattice translations via the FFT
    cross-correlation, refined per axis by quadratic interpolation of the
    log-correlation peak; the phase is optimal analytically.  Returns
    (distance, y, theta).
    """
    if a.grid != b.grid:
        raise ValueError("dist_mod_symmetry: fields live on different grids")
    grid = a.grid
    ah = fwd_values(grid, a.values)
    bh = fwd_values(grid, b.values)
    # C(y) = <a(.-y), b>; its transform is conj(ahat) bhat
    corr = inv_values(grid, np.conj(ah) * bh) * TWO_PI**1.5
    mag = np.abs(corr)
    idx = np.unravel_index(int(np.argmax(mag)), mag.shape)

    n = grid.n
    offs = np.zeros(3)
    for axis in range(3):
        im1 = list(idx)
        ip1 = list(idx)
        im1[axis] = (idx[axis] - 1) % n
        ip1[axis] = (idx[axis] + 1) % n
        offs[axis] = _parabolic_peak(mag[tuple(im1)], mag[idx], mag[tuple(ip1)])

    # lattice coordinate of the correlation array index maps to shift y
    y = np.array([grid.x_axis[idx[j]] + offs[j] * grid.dx for j in range(3)])
    # evaluate C at the refined shift through the Fourier sum
    kx, ky, kz = grid.k_mesh
    phase = np.exp(1j * (kx * y[0] + ky * y[1] + kz * y[2]))
    c_val = complex(np.sum(np.conj(ah) * bh * phase) * grid.dk**3)
    theta = float(np.angle(c_val))

    na2 = float(np.sum(np.abs(a.values) ** 2) * grid.dx**3)
    nb2 = float(np.sum(np.abs(b.values) ** 2) * grid.dx**3)
    d2 = max(na2 + nb2 - 2.0 * abs(c_val), 0.0)
    return float(np.sqrt(d2)), y, theta % (2.0 * np.pi)


def shift_values(grid: Grid, values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """f(. - y) by the exact Fourier phase (sub-lattice shifts allowed)."""
    kx, ky, kz = grid.k_mesh
    phase = np.exp(-1j * (kx * y[0] + ky * y[1] + kz * y[2]))
    out = inv_values(grid, phase * fwd_values(grid, values))
    if np.isrealobj(values):
        return out.real
    return out
