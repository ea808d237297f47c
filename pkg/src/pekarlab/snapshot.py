"""Binary state snapshots (PLK1 container).

Layout, little-endian throughout:

    magic  4s   = b"PLK1"
    version u32 = 1
    n       u32
    L       f64
    alpha   f64
    m_e     f64
    name_len u32, name bytes (utf-8)
    n_params u32, then per param: key_len u32, key bytes, value f64
    psi_re, psi_im   n^3 f64 each, canonical row-major, position lattice
    phi_re, phi_im   n^3 f64 each, frequency lattice (transform order)

Round trips are bit-identical; the loader validates header-vs-payload
length and refuses truncated or cross-grid files.
"""
from __future__ import annotations

import struct

import numpy as np

from . import state as st
from .medium import Medium, medium_profile
from .spectral import Grid, ScalarFieldK, ScalarFieldX

MAGIC = b"PLK1"
VERSION = 1


class SnapshotError(ValueError):
    pass


def save_snapshot(s: st.PolaronState, path: str) -> None:
    grid = s.grid
    med = s.medium
    name = med.name.encode("utf-8")
    parts = [MAGIC, struct.pack("<IId d d", VERSION, grid.n, grid.length, s.alpha, med.m_e)]
    parts.append(struct.pack("<I", len(name)))
    parts.append(name)
    params = sorted(med.params.items())
    parts.append(struct.pack("<I", len(params)))
    for key, val in params:
        kb = key.encode("utf-8")
        parts.append(struct.pack("<I", len(kb)))
        parts.append(kb)
        parts.append(struct.pack("<d", float(val)))
    psi = np.ascontiguousarray(s.psi.values, dtype=complex)
    phi = np.ascontiguousarray(s.phi.values, dtype=complex)
    for arr in (psi.real, psi.imag, phi.real, phi.imag):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def _read_exact(fh, count: int) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise SnapshotError("snapshot truncated")
    return buf


def load_snapshot(path: str, expected_grid: Grid | None = None,
                  medium: Medium | None = None) -> st.PolaronState:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise SnapshotError("bad magic: not a PLK1 snapshot")
        version, n = struct.unpack("<II", _read_exact(fh, 8))
        if version != VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        L, alpha, m_e = struct.unpack("<ddd", _read_exact(fh, 24))
        (name_len,) = struct.unpack("<I", _read_exact(fh, 4))
        name = _read_exact(fh, name_len).decode("utf-8")
        (n_params,) = struct.unpack("<I", _read_exact(fh, 4))
        params = {}
        for _ in range(n_params):
            (klen,) = struct.unpack("<I", _read_exact(fh, 4))
            key = _read_exact(fh, klen).decode("utf-8")
            (val,) = struct.unpack("<d", _read_exact(fh, 8))
            params[key] = val
        grid = Grid(n, L)
        if expected_grid is not None and grid != expected_grid:
            raise SnapshotError(
                f"snapshot grid (n={n}, L={L:g}) does not match the configured grid "
                f"(n={expected_grid.n}, L={expected_grid.length:g}); no resampling is done"
            )
        count = n**3
        arrays = []
        for _ in range(4):
            buf = _read_exact(fh, 8 * count)
            arrays.append(np.frombuffer(buf, dtype="<f8").reshape(grid.shape))
        if fh.read(1):
            raise SnapshotError("snapshot has trailing bytes beyond the declared payload")
    med = medium if medium is not None else medium_profile(name, params, m_e)
    psi = arrays[0] + 1j * arrays[1]
    phi = arrays[2] + 1j * arrays[3]
    return st.PolaronState(
        psi=ScalarFieldX(grid, psi),
        phi=ScalarFieldK(grid, phi),
        medium=med,
        alpha=alpha,
    )
