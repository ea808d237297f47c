"""Periodic cubic grid and discrete Fourier calculus.

Conventions (fixed globally, every constant downstream derives from them):

    forward:   fhat(k) = (2 pi)^{-3/2} dx^3 sum_x f(x) e^{-i k.x}
    inverse:   f(x)    = (2 pi)^{-3/2} dk^3 sum_k fhat(k) e^{+i k.x}

with the position lattice x_j = -L/2 + j dx and the frequency lattice in
transform-native (fftfreq) order, dk = 2 pi / L.  Under this scaling the
discrete Plancherel identity dx^3 sum |f|^2 = dk^3 sum |fhat|^2 holds to
round-off, and kernel convolution against a radial multiplier W(k) reads

    (w * f)(x) = (2 pi)^3 inverse(W . fhat),   w(x) = int W(k) e^{i k.x} dk.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from ._threads import workers

TWO_PI = 2.0 * np.pi
_FWD_NORM = (2.0 * np.pi) ** -1.5

_SMOOTH_PRIMES = (2, 3, 5, 7)


def _is_smooth(n: int) -> bool:
    for p in _SMOOTH_PRIMES:
        while n % p == 0:
            n //= p
    return n == 1


def next_fft_size(n: int) -> int:
    """Smallest even 7-smooth integer >= n (keeps FFTs fast)."""
    n = max(8, int(np.ceil(n)))
    if n % 2:
        n += 1
    while not _is_smooth(n):
        n += 2
    return n


class Grid:
    """Cubic periodic lattice with paired position/frequency axes.

    Parameters
    ----------
    n : points per axis, even and >= 8.
    length : box edge L; positions run over [-L/2, L/2).
    """

    def __init__(self, n: int, length: float):
        n = int(n)
        if n < 8 or n % 2:
            raise ValueError(f"grid n must be even and >= 8, got {n}")
        if not np.isfinite(length) or length <= 0:
            raise ValueError(f"grid length must be positive, got {length}")
        self.n = n
        self.length = float(length)
        self.dx = self.length / n
        self.dk = TWO_PI / self.length
        self.x_axis = -self.length / 2 + self.dx * np.arange(n)
        self.k_axis = TWO_PI * sfft.fftfreq(n, d=self.dx)

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n and other.length == self.length

    def __hash__(self):
        return hash((self.n, self.length))

    def __repr__(self):
        return f"Grid(n={self.n}, length={self.length:g})"

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @cached_property
    def x_mesh(self):
        return np.meshgrid(self.x_axis, self.x_axis, self.x_axis, indexing="ij")

    @cached_property
    def k_mesh(self):
        return np.meshgrid(self.k_axis, self.k_axis, self.k_axis, indexing="ij")

    @cached_property
    def k_squared(self):
        kx, ky, kz = self.k_mesh
        return kx * kx + ky * ky + kz * kz

    @cached_property
    def k_mag(self):
        return np.sqrt(self.k_squared)

    @cached_property
    def _sign(self):
        # e^{-i k.x} against the -L/2-origin lattice folds into (-1)^{j1+j2+j3}.
        s = (-1.0) ** np.arange(self.n)
        return s[:, None, None] * s[None, :, None] * s[None, None, :]

    def multiplier(self, fn) -> np.ndarray:
        """Evaluate fn(kx, ky, kz) on the signed frequency mesh."""
        return fn(*self.k_mesh)

    def radial_multiplier(self, fn) -> np.ndarray:
        """Evaluate a radial map |k| -> value on the frequency lattice."""
        return fn(self.k_mag)


@dataclass
class ScalarFieldX:
    """Complex scalar samples on the position lattice (row-major)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")

    def copy(self) -> "ScalarFieldX":
        return ScalarFieldX(self.grid, self.values.copy())

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2).real * self.grid.dx**3))


@dataclass
class ScalarFieldK:
    """Complex scalar samples on the frequency lattice (transform order)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")

    def copy(self) -> "ScalarFieldK":
        return ScalarFieldK(self.grid, self.values.copy())

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2).real * self.grid.dk**3))


def fwd_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Forward transform on raw arrays (hot path used by the solvers)."""
    return (_FWD_NORM * grid.dx**3) * (grid._sign * sfft.fftn(values, workers=workers()))


def inv_values(grid: Grid, values_k: np.ndarray) -> np.ndarray:
    scale = _FWD_NORM * grid.dk**3 * grid.n**3
    return scale * sfft.ifftn(grid._sign * values_k, workers=workers())


def forward_transform(f: ScalarFieldX) -> ScalarFieldK:
    return ScalarFieldK(f.grid, fwd_values(f.grid, f.values))


def inverse_transform(g: ScalarFieldK) -> ScalarFieldX:
    return ScalarFieldX(g.grid, inv_values(g.grid, g.values))


def apply_multiplier(g: ScalarFieldK, m: np.ndarray) -> ScalarFieldK:
    """Pointwise product m(k) g(k); m must be sampled on the same lattice."""
    m = np.asarray(m)
    if m.shape != g.grid.shape:
        raise ValueError("multiplier shape does not match grid")
    return ScalarFieldK(g.grid, m * g.values)


def convolve_values(grid: Grid, values: np.ndarray, W: np.ndarray) -> np.ndarray:
    """(w * f) for w(x) = int W(k) e^{ik.x} dk, raw-array form.

    Real input with an even real W returns a real-valued array; the
    imaginary round-off residue (<= 1e-12 relative) is truncated.
    """
    out = TWO_PI**3 * inv_values(grid, W * fwd_values(grid, values))
    if np.isrealobj(values):
        return out.real
    return out


def convolve_kernel(f: ScalarFieldX, W: np.ndarray) -> ScalarFieldX:
    W = np.asarray(W)
    if W.shape != f.grid.shape:
        raise ValueError("kernel multiplier shape does not match grid")
    vals = f.values
    real_in = np.isrealobj(vals) or not np.any(vals.imag)
    out = TWO_PI**3 * inv_values(f.grid, W * fwd_values(f.grid, vals))
    if real_in:
        out = out.real.astype(complex)
    return ScalarFieldX(f.grid, out)


def inner(a, b, space: str = "auto") -> complex:
    """Discrete sesquilinear inner product <a, b> = w^3 sum conj(a) b.

    The quadrature weight w is dx for position-space fields and dk for
    frequency-space fields.
    """
    if a.grid != b.grid:
        raise ValueError("inner: fields live on different grids")
    if space == "auto":
        space = "K" if isinstance(a, ScalarFieldK) else "X"
    w = a.grid.dk if space.upper() == "K" else a.grid.dx
    return complex(np.sum(np.conj(a.values) * b.values) * w**3)


def gradient_values(grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
    """Spectral partial derivative along one axis."""
    vhat = fwd_values(grid, values)
    out = inv_values(grid, 1j * grid.k_mesh[axis] * vhat)
    if np.isrealobj(values):
        return out.real
    return out
