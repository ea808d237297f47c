"""Flat dotted-key run configuration: `key = value`, one per line, `#` comments.

Unknown keys are rejected (typos in experiment configs are the main
operational hazard); every numeric key is range-validated.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    pass


def _parse_floats(text: str):
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_ints_or_auto(text: str):
    return int(float(text))


@dataclass
class RunConfig:
    medium_name: str = "polynomial"
    medium_a: float = 2.0
    m_e: float = 1.0
    alpha: float = 12.0
    alpha_list: list = field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    grid_n: int = 0          # 0 = auto (box policy chooses)
    c_box: float = 10.0
    solver_tol: float = 1e-9
    solver_max_iters: int = 4000
    tw_v_list: list = field(default_factory=lambda: [0.02, 0.04, 0.06, 0.08])
    mass_p_list: list = field(default_factory=lambda: [0.1, 0.2, 0.3])
    mass_tol: float = 0.05
    dt: float = 1e-3
    T: float = 1.0
    audit_every: int = 20
    outdir: str = "out"
    seed: int = 0


_KEYS = {
    "medium.name": ("medium_name", str),
    "medium.params.a": ("medium_a", float),
    "physics.m_e": ("m_e", float),
    "physics.alpha": ("alpha", float),
    "physics.alpha_list": ("alpha_list", _parse_floats),
    "grid.n": ("grid_n", _parse_ints_or_auto),
    "grid.c_box": ("c_box", float),
    "solver.tol": ("solver_tol", float),
    "solver.max_iters": ("solver_max_iters", int),
    "tw.v_list": ("tw_v_list", _parse_floats),
    "mass.p_list": ("mass_p_list", _parse_floats),
    "mass.tol": ("mass_tol", float),
    "dynamics.dt": ("dt", float),
    "dynamics.T": ("T", float),
    "dynamics.audit_every": ("audit_every", int),
    "io.outdir": ("outdir", str),
    "io.seed": ("seed", int),
}

_FIELD_TO_KEY = {attr: key for key, (attr, _) in _KEYS.items()}


def _validate(cfg: RunConfig):
    if cfg.m_e <= 0:
        raise ConfigError("physics.m_e must be > 0")
    if cfg.alpha <= 0:
        raise ConfigError("physics.alpha must be > 0")
    if any(a <= 0 for a in cfg.alpha_list):
        raise ConfigError("physics.alpha_list entries must be > 0")
    if cfg.grid_n != 0 and (cfg.grid_n < 8 or cfg.grid_n % 2):
        raise ConfigError("grid.n must be even >= 8 (or 0 for automatic)")
    if cfg.c_box < 6:
        raise ConfigError("grid.c_box must be >= 6")
    if not (0 < cfg.solver_tol <= 1e-3):
        raise ConfigError("solver.tol must lie in (0, 1e-3]")
    if cfg.solver_max_iters < 10:
        raise ConfigError("solver.max_iters must be >= 10")
    for f in cfg.tw_v_list:
        if not (0.0 < f < 1.0):
            raise ConfigError(
                f"tw.v_list entry {f:g} is not a subsonic fraction of v_crit: traveling "
                "waves exist only below the medium's sound speed (positive critical "
                "velocity assumption)"
            )
    if any(p < 0 for p in cfg.mass_p_list):
        raise ConfigError("mass.p_list entries must be >= 0")
    if not (0 < cfg.mass_tol < 1):
        raise ConfigError("mass.tol must lie in (0, 1)")
    if cfg.dt <= 0:
        raise ConfigError("dynamics.dt must be > 0")
    if cfg.T < 0:
        raise ConfigError("dynamics.T must be >= 0")
    if cfg.audit_every < 1:
        raise ConfigError("dynamics.audit_every must be >= 1")


def parse_config(path: str) -> RunConfig:
    cfg = RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
            attr, conv = _KEYS[key]
            try:
                setattr(cfg, attr, conv(value))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    _validate(cfg)
    return cfg


def render_config(cfg: RunConfig) -> str:
    """Fully resolved config text (echoed into outdir for reproducibility)."""
    lines = []
    for f in fields(cfg):
        key = _FIELD_TO_KEY[f.name]
        val = getattr(cfg, f.name)
        if isinstance(val, list):
            val = ",".join(f"{x:.17g}" for x in val)
        elif isinstance(val, float):
            val = f"{val:.17g}"
        lines.append(f"{key} = {val}")
    return "\n".join(sorted(lines)) + "\n"
