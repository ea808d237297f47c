"""Coupling profiles of the excitable medium and their derived quantities.

A medium is a pair of radial functions (eps, v) with eps > 0.  Everything
the solvers need derives from them:

    W(k)   = v(k)^2 / eps(k)      interaction multiplier,
    ghat   = v / sqrt(eps)        coupling form factor (so W = ghat^2),
    v_crit = inf_k eps(k)/|k|     critical (sound) velocity,
    M0     = int W d3k,  M2 = int k^2 W d3k   kernel moments.

The standing admissibility checks are: eps > 0 everywhere, v_crit > 0,
ghat in H^2 (finite (1+k^2)^2 W tail), and the pointwise lower bound
ghat(k) >= (1+|k|)^{-9/2}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .spectral import Grid


class MediumError(ValueError):
    pass


@dataclass
class Medium:
    name: str
    eps: Callable[[np.ndarray], np.ndarray]
    v: Callable[[np.ndarray], np.ndarray]
    m_e: float = 1.0
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def W(self, k):
        k = np.asarray(k, dtype=float)
        return self.v(k) ** 2 / self.eps(k)

    def ghat(self, k):
        k = np.asarray(k, dtype=float)
        return self.v(k) / np.sqrt(self.eps(k))

    # lattice samplings ------------------------------------------------
    def eps_on(self, grid: Grid) -> np.ndarray:
        return self.eps(grid.k_mag)

    def v_on(self, grid: Grid) -> np.ndarray:
        return self.v(grid.k_mag)

    def W_on(self, grid: Grid) -> np.ndarray:
        return self.W(grid.k_mag)


@dataclass
class MediumMoments:
    M0: float
    M2: float
    v_crit: float
    W0: float


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    witness_k: float | None = None


@dataclass
class ValidationReport:
    medium: str
    checks: list
    v_crit: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]


# geometric sampling used by all assumption checks (fixed density, documented)
_K_SAMPLES = np.geomspace(1e-4, 1e4, 4096)


def medium_profile(name: str, params: dict | None = None, m_e: float = 1.0) -> Medium:
    """Construct a named profile without admissibility gatekeeping."""
    params = dict(params or {})
    if m_e <= 0:
        raise MediumError("electron mass m_e must be positive")
    if name == "polynomial":
        a = float(params.get("a", 2.0))
        params["a"] = a
        return Medium(
            name=name,
            eps=lambda k: np.sqrt(1.0 + k * k),
            v=lambda k, _a=a: (1.0 + k * k) ** (-_a),
            m_e=m_e,
            params=params,
        )
    if name == "pekar-nonregular":
        # eps = 1, v = 1/|k|: the excluded non-regularized profile.
        return Medium(
            name=name,
            eps=lambda k: np.ones_like(np.asarray(k, dtype=float)),
            v=lambda k: 1.0 / np.maximum(np.asarray(k, dtype=float), 1e-300),
            m_e=m_e,
            params=params,
        )
    raise MediumError(f"unknown medium profile '{name}'")


def critical_velocity(med: Medium) -> float:
    """inf_k eps(k)/|k|, by geometric-grid scan plus golden-section polish.

    An infimum approached as k -> infinity is detected by comparing the
    grid minimum against the large-k limit.
    """
    q = med.eps(_K_SAMPLES) / _K_SAMPLES
    i = int(np.argmin(q))
    best = q[i]
    if 0 < i < len(_K_SAMPLES) - 1:
        res = optimize.minimize_scalar(
            lambda r: float(med.eps(np.array([r]))[0] / r),
            bracket=(_K_SAMPLES[i - 1], _K_SAMPLES[i], _K_SAMPLES[i + 1]),
            method="golden",
        )
        best = min(best, float(res.fun))
    # tail-limit comparison
    for r in (1e6, 1e8):
        best = min(best, float(med.eps(np.array([r]))[0] / r))
    return float(best)


def _tail_exponent(f: Callable, lo: float = 1e3, hi: float = 1e6) -> float:
    """Empirical decay exponent of a radial map at large k."""
    ylo = float(f(np.array([lo]))[0])
    yhi = float(f(np.array([hi]))[0])
    if ylo <= 0 or yhi <= 0:
        return -np.inf
    return (math.log(yhi) - math.log(ylo)) / (math.log(hi) - math.log(lo))


def validate(med: Medium) -> ValidationReport:
    """Run all standing-assumption checks; failures carry a witness k."""
    checks = []

    eps_vals = med.eps(_K_SAMPLES)
    eps0 = float(med.eps(np.array([0.0]))[0])
    bad = np.flatnonzero(~(eps_vals > 0))
    if eps0 > 0 and bad.size == 0:
        checks.append(CheckResult("eps_positive", True, "eps(k) > 0 on all sampled k"))
    else:
        kw = 0.0 if eps0 <= 0 else float(_K_SAMPLES[bad[0]])
        checks.append(CheckResult("eps_positive", False, f"eps(k) <= 0 at k = {kw:g}", kw))

    vc = critical_velocity(med)
    if vc > 1e-12:
        checks.append(CheckResult("critical_velocity", True, f"v_crit = {vc:.6g} > 0"))
    else:
        checks.append(
            CheckResult(
                "critical_velocity",
                False,
                f"v_crit = {vc:.3g}: medium has vanishing sound speed "
                "(supersonicity assumption violated)",
            )
        )

    # H^2 membership of the coupling: int (1+k^2)^2 W(k) d3k < infinity.
    # The tail of k^2 (1+k^2)^2 W must decay strictly faster than 1/k.
    slope = _tail_exponent(lambda k: k**2 * (1 + k**2) ** 2 * med.W(k))
    if slope < -1.0 - 1e-9:
        checks.append(CheckResult("g_in_H2", True, f"H2 tail exponent {slope:.3f} < -1"))
    else:
        checks.append(
            CheckResult(
                "g_in_H2",
                False,
                f"H2 tail integral diverges (k^6-weighted W decays like k^{slope + 2:.2f})",
                1e6,
            )
        )

    gh = med.ghat(_K_SAMPLES)
    floor = (1.0 + _K_SAMPLES) ** -4.5
    bad = np.flatnonzero(np.abs(gh) < floor * (1 - 1e-12))
    if bad.size == 0:
        checks.append(CheckResult("ghat_lower_bound", True, "|ghat| >= (1+k)^{-9/2} on all sampled k"))
    else:
        kw = float(_K_SAMPLES[bad[0]])
        checks.append(
            CheckResult("ghat_lower_bound", False, f"|ghat(k)| < (1+k)^{{-9/2}} at k = {kw:g}", kw)
        )

    return ValidationReport(medium=med.name, checks=checks, v_crit=vc)


def builtin_medium(name: str, params: dict | None = None, m_e: float = 1.0) -> Medium:
    """Named profile that must pass validate(); rejects with the failing check."""
    params = dict(params or {})
    if name == "polynomial":
        a = float(params.get("a", 2.0))
        # admissibility window: a <= 3/2 breaks the H^2 tail, a > 2 breaks
        # the ghat lower bound at large k.
        if a <= 1.5:
            raise MediumError(
                f"polynomial medium with a = {a:g}: H2 tail integral of the coupling diverges "
                "(requires a > 3/2)"
            )
        if a > 2.0:
            raise MediumError(
                f"polynomial medium with a = {a:g}: form-factor lower bound "
                "|ghat| >= (1+k)^{-9/2} fails at large k (requires a <= 2)"
            )
    med = medium_profile(name, params, m_e)
    report = validate(med)
    if not report.passed:
        msgs = "; ".join(f"{c.name}: {c.detail}" for c in report.failures())
        raise MediumError(f"medium '{name}' rejected: {msgs}")
    return med


def moments(med: Medium, rtol: float = 1e-11) -> MediumMoments:
    """Radial kernel moments M0 = int W d3k and M2 = int k^2 W d3k.

    Adaptive quadrature on [0, cut] + [cut, inf); a divergent tail is
    reported as an error rather than a number.
    """
    if _tail_exponent(lambda k: k**4 * med.W(k)) >= -1.0 - 1e-9:
        raise MediumError("moment integral diverges: k^4 W(k) tail is not integrable")

    def radial(weight_pow):
        f = lambda r: r**weight_pow * med.W(np.array([r]))[0]
        a1, e1 = integrate.quad(f, 0.0, 10.0, epsabs=0.0, epsrel=rtol, limit=400)
        a2, e2 = integrate.quad(f, 10.0, np.inf, epsabs=1e-300, epsrel=rtol, limit=400)
        return 4.0 * np.pi * (a1 + a2)

    M0 = radial(2)
    M2 = radial(4)
    W0 = float(med.W(np.array([0.0]))[0])
    return MediumMoments(M0=M0, M2=M2, v_crit=critical_velocity(med), W0=W0)


@dataclass
class OscillatorParams:
    omega: float
    e_osc: float
    ell: float
    degenerate: bool = False


def oscillator_params(med: Medium, alpha: float, mom: MediumMoments | None = None) -> OscillatorParams:
    """Frequency, ground energy and length of the strong-coupling oscillator.

    omega^2 = 2 alpha M2 / (3 m): the quadratic kernel expansion
    h(z) ~ M0 - (M2/6) z^2 applied to the density-density interaction
    gives the self-consistent harmonic well (m omega^2 / 2) x^2 with this
    frequency; e_osc = (3/2) omega is its 3-D ground energy.
    """
    if alpha < 0:
        raise MediumError("coupling alpha must be >= 0")
    mom = mom or moments(med)
    if alpha == 0.0:
        return OscillatorParams(omega=0.0, e_osc=0.0, ell=np.inf, degenerate=True)
    omega = math.sqrt(2.0 * alpha * mom.M2 / (3.0 * med.m_e))
    return OscillatorParams(
        omega=omega,
        e_osc=1.5 * omega,
        ell=1.0 / math.sqrt(med.m_e * omega),
        degenerate=False,
    )


# ---------------------------------------------------------------------------
# real-space kernel profile and periodic-image control


def kernel_radial(med: Medium, r: float) -> float:
    """h(r) = int W(k) e^{ik.x} d3k = (4 pi / r) int_0^inf k W(k) sin(kr) dk."""
    if r <= 0:
        mom_like, _ = integrate.quad(
            lambda k: k * k * med.W(np.array([k]))[0], 0, np.inf, epsrel=1e-10, limit=400
        )
        return 4.0 * np.pi * mom_like
    key = ("h", round(r, 9))
    if key in med._cache:
        return med._cache[key]
    f = lambda k: k * med.W(np.array([k]))[0]
    total = 0.0
    # oscillatory tail handled by scipy's sin-weighted rule
    val, _ = integrate.quad(f, 0.0, 60.0, weight="sin", wvar=r, epsabs=1e-13, limit=800)
    total += val
    val, _ = integrate.quad(f, 60.0, 400.0, weight="sin", wvar=r, epsabs=1e-14, limit=400)
    total += val
    out = 4.0 * np.pi * total / r
    med._cache[key] = out
    return out


_IMAGE_SHELLS = ((6, 1.0), (12, math.sqrt(2.0)), (8, math.sqrt(3.0)), (6, 2.0), (24, math.sqrt(5.0)))


def image_sum(med: Medium, L: float) -> float:
    """sum over nonzero lattice vectors n of h(|n| L), nearest shells.

    Bounds the spurious periodic-image interaction energy per unit
    coupling for a density concentrated well inside the box.
    """
    return sum(count * abs(kernel_radial(med, d * L)) for count, d in _IMAGE_SHELLS)
