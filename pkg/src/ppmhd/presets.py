"""Experiment presets, run configuration and the config-file grammar.

Preset catalog
--------------
sine-1d / sine-2d      smooth low-density waves with exact solutions
vortex-2d              smooth magnetized vortex, center pressure ~5e-12
vacuum-tube-1d         near-vacuum Riemann problem
leblanc-b-1d           huge pressure jump with strong transverse field
blast-2d               strong cylindrical blast in a low-beta background
jet-2d-weak/-strong    high Mach number magnetized jets (nozzle inflow)
counterexample-1d/-2d  the hand-checkable non-positivity probe grids
orszag-tang-2d,        classic benchmark data from the general MHD test
rotor-2d               literature (no in-house reference values; kept out
                       of the acceptance gate)

Config files are INI-style: a [run] section of key=value pairs, plus an
optional [problem] section for inline initial data given as numpy-syntax
expressions of x (and y, z).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigError
from .grid import OUTFLOW, PERIODIC, CartesianGrid, GridGeometry, InflowRegion


def _bcast(val, like):
    return np.broadcast_to(np.asarray(val, dtype=float), np.shape(like)).copy()


def stack3(like, c0, c1, c2):
    """Stack three scalar fields (constants allowed) into (..., 3)."""
    return np.stack([_bcast(c0, like), _bcast(c1, like), _bcast(c2, like)],
                    axis=-1)


@dataclass(frozen=True)
class AnalyticFields:
    """Vectorized primitive-variable initial data callables."""

    rho: Callable
    velocity: Callable
    pressure: Callable
    bfield: Callable


@dataclass(frozen=True)
class Preset:
    name: str
    dim: int
    gamma: float
    domain: tuple                     # ((lo, hi), ...) per axis
    boundary: tuple                   # grid rules per axis
    fields: Optional[AnalyticFields] = None
    grid_builder: Optional[Callable] = None  # (cells, params) -> CartesianGrid
    exact: Optional[Callable] = None  # t -> AnalyticFields
    tend: float = 0.1
    default_cells: tuple = (64,)
    smooth: bool = False
    in_acceptance: bool = True
    params: dict = dc_field(default_factory=dict)

    def geometry(self, cells, ghost=1):
        cells = tuple(int(c) for c in cells)
        if len(cells) != self.dim:
            raise ConfigError(
                f"preset {self.name} is {self.dim}D; got cells {cells}")
        spacings = tuple((hi - lo) / n for (lo, hi), n in zip(self.domain, cells))
        origin = tuple(lo for lo, _ in self.domain)
        return GridGeometry(counts=cells, spacings=spacings, origin=origin,
                            ghost=ghost)


# ----------------------------------------------------------------------
# Smooth waves
# ----------------------------------------------------------------------

def _sine_1d_fields(t):
    return AnalyticFields(
        rho=lambda x: 1.0 + 0.99 * np.sin(x - t),
        velocity=lambda x: stack3(x, 1.0, 0.0, 0.0),
        pressure=lambda x: _bcast(1.0, x),
        bfield=lambda x: stack3(x, 0.1, 0.0, 0.0),
    )


def _sine_2d_fields(t):
    return AnalyticFields(
        rho=lambda x, y: 1.0 + 0.99 * np.sin(x + y - 2.0 * t),
        velocity=lambda x, y: stack3(x + y, 1.0, 1.0, 0.0),
        pressure=lambda x, y: _bcast(1.0, x + y),
        bfield=lambda x, y: stack3(x + y, 0.1, 0.1, 0.0),
    )


VORTEX_STRENGTH = 5.389489439


def _vortex_fields(t):
    """Magnetized vortex advected diagonally; periodic wrap on [-10, 10]^2."""
    mu = VORTEX_STRENGTH

    def shift(x, y):
        xs = np.mod(x - t + 10.0, 20.0) - 10.0
        ys = np.mod(y - t + 10.0, 20.0) - 10.0
        return xs, ys

    def rho(x, y):
        return _bcast(1.0, x + y)

    def velocity(x, y):
        xs, ys = shift(x, y)
        amp = mu / (np.sqrt(2.0) * np.pi) * np.exp(
            0.5 * (1.0 - xs ** 2 - ys ** 2))
        return stack3(x + y, 1.0 + amp * (-ys), 1.0 + amp * xs, 0.0)

    def pressure(x, y):
        xs, ys = shift(x, y)
        r2 = xs ** 2 + ys ** 2
        return 1.0 - mu ** 2 * (1.0 + r2) / (8.0 * np.pi ** 2) * np.exp(1.0 - r2)

    def bfield(x, y):
        xs, ys = shift(x, y)
        amp = mu / (2.0 * np.pi) * np.exp(0.5 * (1.0 - xs ** 2 - ys ** 2))
        return stack3(x + y, amp * (-ys), amp * xs, 0.0)

    return AnalyticFields(rho=rho, velocity=velocity, pressure=pressure,
                          bfield=bfield)


# ----------------------------------------------------------------------
# Riemann problems
# ----------------------------------------------------------------------

def _two_state_1d(left, right):
    lrho, lv, lp, lb = left
    rrho, rv, rp, rb = right

    def pick(x, lval, rval):
        return np.where(x < 0.0, lval, rval)

    return AnalyticFields(
        rho=lambda x: pick(x, lrho, rrho),
        velocity=lambda x: np.stack(
            [pick(x, lv[c], rv[c]) for c in range(3)], axis=-1),
        pressure=lambda x: pick(x, lp, rp),
        bfield=lambda x: np.stack(
            [pick(x, lb[c], rb[c]) for c in range(3)], axis=-1),
    )


_VACUUM_TUBE = _two_state_1d(
    (1e-12, (0.0, 0.0, 0.0), 1e-12, (0.0, 0.0, 0.0)),
    (1.0, (0.0, 0.0, 0.0), 0.5, (0.0, 1.0, 0.0)))

_LEBLANC_B = _two_state_1d(
    (2.0, (0.0, 0.0, 0.0), 1e9, (0.0, 5000.0, 5000.0)),
    (0.001, (0.0, 0.0, 0.0), 1.0, (0.0, 5000.0, 5000.0)))


# ----------------------------------------------------------------------
# 2D strong tests
# ----------------------------------------------------------------------

_BLAST_B1 = 100.0 / np.sqrt(4.0 * np.pi)

_BLAST = AnalyticFields(
    rho=lambda x, y: _bcast(1.0, x + y),
    velocity=lambda x, y: stack3(x + y, 0.0, 0.0, 0.0),
    pressure=lambda x, y: np.where(np.hypot(x, y) < 0.1, 1000.0, 0.1),
    bfield=lambda x, y: stack3(x + y, _BLAST_B1, 0.0, 0.0),
)


def _jet_fields(ba):
    return AnalyticFields(
        rho=lambda x, y: _bcast(0.14, x + y),
        velocity=lambda x, y: stack3(x + y, 0.0, 0.0, 0.0),
        pressure=lambda x, y: _bcast(1.0, x + y),
        bfield=lambda x, y: stack3(x + y, 0.0, ba, 0.0),
    )


def _jet_inflow_state(ba, gamma=1.4):
    rho, p, vy = gamma, 1.0, 800.0
    energy = p / (gamma - 1.0) + 0.5 * rho * vy ** 2 + 0.5 * ba ** 2
    return np.array([rho, 0.0, rho * vy, 0.0, 0.0, ba, 0.0, energy])


def _jet_boundary(ba):
    nozzle = InflowRegion(state=_jet_inflow_state(ba),
                          mask_fn=lambda x: np.abs(x) < 0.05)
    return ((OUTFLOW, OUTFLOW), (nozzle, OUTFLOW))


# ----------------------------------------------------------------------
# Benchmark data from the general MHD test literature (no in-house
# reference values; excluded from the acceptance gate).
# ----------------------------------------------------------------------

_ORSZAG_TANG = AnalyticFields(
    rho=lambda x, y: _bcast((5.0 / 3.0) ** 2, x + y),
    velocity=lambda x, y: np.stack(
        [-np.sin(y) + 0 * x, np.sin(x) + 0 * y, np.zeros_like(x + y)],
        axis=-1),
    pressure=lambda x, y: _bcast(5.0 / 3.0, x + y),
    bfield=lambda x, y: np.stack(
        [-np.sin(y) + 0 * x, np.sin(2.0 * x) + 0 * y, np.zeros_like(x + y)],
        axis=-1),
)


def _rotor_fields():
    r0, r1 = 0.1, 0.115
    u0 = 2.0

    def taper(r):
        return np.clip((r1 - r) / (r1 - r0), 0.0, 1.0)

    def rho(x, y):
        r = np.hypot(x - 0.5, y - 0.5)
        return 1.0 + 9.0 * taper(r)

    def velocity(x, y):
        r = np.hypot(x - 0.5, y - 0.5)
        f = taper(r)
        rs = np.maximum(r, 1e-12)
        vx = -f * u0 * (y - 0.5) / np.where(r < r0, r0, rs)
        vy = f * u0 * (x - 0.5) / np.where(r < r0, r0, rs)
        return np.stack([vx, vy, np.zeros_like(vx)], axis=-1)

    return AnalyticFields(
        rho=rho,
        velocity=velocity,
        pressure=lambda x, y: _bcast(1.0, x + y),
        bfield=lambda x, y: stack3(x + y, 5.0 / np.sqrt(4.0 * np.pi), 0.0, 0.0),
    )


# ----------------------------------------------------------------------
# The hand-checkable non-positivity probe grids
# ----------------------------------------------------------------------

def counterexample_1d_grid(cells=(8,), params=None):
    """Three-state 1D arrangement (pressure p in every cell) whose single
    LF step with standard viscosity loses positivity."""
    params = params or {}
    p = float(params.get("p", 1e-5))
    bconst = 10.0
    n = max(int(cells[0]), 5)
    left = np.array([8 / 25, 0.0, -8 / 25, 0.0, bconst, 10.0, 0.0,
                     2504 / 25 + 2.5 * p])
    mid = np.array([0.5, 1.5, -2.0, 0.0, bconst, 8.0, 0.0, 353 / 4 + 2.5 * p])
    right = np.array([0.2, 0.0, 0.2, 0.0, bconst, 5.0, 0.0, 313 / 5 + 2.5 * p])
    interior = np.tile(right, (n, 1))
    interior[: n // 2] = left
    interior[n // 2] = mid
    geom = GridGeometry(counts=(n,), spacings=(1.0,), origin=(0.0,))
    return CartesianGrid.from_interior(geom, ((OUTFLOW, OUTFLOW),), interior,
                                       b_const=bconst)


def counterexample_2d_grid(cells=(6, 6), params=None):
    """Slightly divergence-violating 2D arrangement that defeats any
    viscosity multiplier chi at low pressure."""
    params = params or {}
    p = float(params.get("p", 1e-8))
    eps = float(params.get("eps", 1e-3))
    chi = float(params.get("chi", 1.0))
    gamma = 1.4
    nx, ny = (max(int(c), 5) for c in cells)
    other = np.array([1.0, (4 * chi + eps) / (4 * chi), 0.0, 0.0,
                      1.0 + eps / 2.0, 0.0, 0.0,
                      p / (gamma - 1.0) + (4 * chi + eps) ** 2 / (32 * chi ** 2)
                      + (eps + 2.0) ** 2 / 8.0])
    west = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                     p / (gamma - 1.0) + 1.0])
    east = np.array([1.0, 1.0, 0.0, 0.0, 1.0 + eps, 0.0, 0.0,
                     p / (gamma - 1.0) + (1.0 + (1.0 + eps) ** 2) / 2.0])
    interior = np.tile(other, (nx, ny, 1))
    ci, cj = nx // 2, ny // 2
    interior[ci - 1, cj] = west
    interior[ci + 1, cj] = east
    geom = GridGeometry(counts=(nx, ny), spacings=(1.0, 1.0), origin=(0.0, 0.0))
    return CartesianGrid.from_interior(
        geom, ((OUTFLOW, OUTFLOW), (OUTFLOW, OUTFLOW)), interior)


TWO_PI = 2.0 * np.pi

PRESETS = {}


def _register(preset):
    PRESETS[preset.name] = preset
    return preset


_register(Preset(
    name="sine-1d", dim=1, gamma=1.4, domain=((0.0, TWO_PI),),
    boundary=(PERIODIC,), fields=_sine_1d_fields(0.0), exact=_sine_1d_fields,
    tend=0.1, default_cells=(64,), smooth=True))

_register(Preset(
    name="sine-2d", dim=2, gamma=1.4, domain=((0.0, TWO_PI), (0.0, TWO_PI)),
    boundary=(PERIODIC, PERIODIC), fields=_sine_2d_fields(0.0),
    exact=_sine_2d_fields, tend=0.1, default_cells=(32, 32), smooth=True))

_register(Preset(
    name="vortex-2d", dim=2, gamma=5.0 / 3.0,
    domain=((-10.0, 10.0), (-10.0, 10.0)), boundary=(PERIODIC, PERIODIC),
    fields=_vortex_fields(0.0), exact=_vortex_fields, tend=0.05,
    default_cells=(64, 64), smooth=True))

_register(Preset(
    name="vacuum-tube-1d", dim=1, gamma=5.0 / 3.0, domain=((-0.5, 0.5),),
    boundary=((OUTFLOW, OUTFLOW),), fields=_VACUUM_TUBE, tend=0.1,
    default_cells=(200,)))

_register(Preset(
    name="leblanc-b-1d", dim=1, gamma=1.4, domain=((-10.0, 10.0),),
    boundary=((OUTFLOW, OUTFLOW),), fields=_LEBLANC_B, tend=3e-5,
    default_cells=(3200,)))

_register(Preset(
    name="blast-2d", dim=2, gamma=1.4, domain=((-0.5, 0.5), (-0.5, 0.5)),
    boundary=((OUTFLOW, OUTFLOW), (OUTFLOW, OUTFLOW)), fields=_BLAST,
    tend=0.01, default_cells=(160, 160)))

for _suffix, _ba, _tend in (("weak", np.sqrt(20.0), 0.002),
                            ("strong", np.sqrt(200.0), 0.001)):
    _register(Preset(
        name=f"jet-2d-{_suffix}", dim=2, gamma=1.4,
        domain=((-0.5, 0.5), (0.0, 1.5)), boundary=_jet_boundary(_ba),
        fields=_jet_fields(_ba), tend=_tend, default_cells=(200, 300),
        params={"ba": float(_ba)}))

_register(Preset(
    name="counterexample-1d", dim=1, gamma=1.4, domain=((0.0, 8.0),),
    boundary=((OUTFLOW, OUTFLOW),), grid_builder=counterexample_1d_grid,
    tend=1.0, default_cells=(8,), params={"p": 1e-5}))

_register(Preset(
    name="counterexample-2d", dim=2, gamma=1.4,
    domain=((0.0, 6.0), (0.0, 6.0)),
    boundary=((OUTFLOW, OUTFLOW), (OUTFLOW, OUTFLOW)),
    grid_builder=counterexample_2d_grid, tend=1.0, default_cells=(6, 6),
    params={"p": 1e-8, "eps": 1e-3, "chi": 1.0}))

_register(Preset(
    name="orszag-tang-2d", dim=2, gamma=5.0 / 3.0,
    domain=((0.0, TWO_PI), (0.0, TWO_PI)), boundary=(PERIODIC, PERIODIC),
    fields=_ORSZAG_TANG, tend=0.5, default_cells=(64, 64),
    in_acceptance=False))

_register(Preset(
    name="rotor-2d", dim=2, gamma=1.4, domain=((0.0, 1.0), (0.0, 1.0)),
    boundary=(PERIODIC, PERIODIC), fields=_rotor_fields(), tend=0.295,
    default_cells=(64, 64), in_acceptance=False))

PRESETS["jet-2d"] = PRESETS["jet-2d-weak"]


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")


# ----------------------------------------------------------------------
# Run configuration
# ----------------------------------------------------------------------

LIMITER_CHAINS = ("none", "pp", "pp+tvb")
SCHEMES = ("lf1", "dg")


@dataclass(frozen=True)
class RunConfig:
    preset: Optional[str] = None
    inline: Optional[dict] = None     # parsed [problem] section
    cells: Optional[tuple] = None
    scheme: str = "dg"
    order: int = 2
    limiter: str = "pp"
    bound: str = "alpha-sqrt"
    cfl: float = 0.15
    tend: Optional[float] = None
    out: str = "out"
    seed: int = 0
    tvb_m: float = 0.0
    divfree: bool = True
    strict: bool = False
    snapshot_every: int = 0           # 0: only final snapshot
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.limiter not in LIMITER_CHAINS:
            raise ConfigError(f"limiter must be one of {LIMITER_CHAINS}")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("cfl must lie in (0, 1]")
        if self.scheme == "dg" and not 0 <= self.order <= 2:
            raise ConfigError("dg order must be 0, 1 or 2")
        if self.preset is None and self.inline is None:
            raise ConfigError("either a preset or inline initial data needed")
        if self.cells is not None and any(int(c) < 4 for c in self.cells):
            raise ConfigError("mesh counts must be at least 4")


_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "sqrt": np.sqrt, "log": np.log, "abs": np.abs, "where": np.where,
    "tanh": np.tanh, "hypot": np.hypot, "minimum": np.minimum,
    "maximum": np.maximum, "pi": np.pi,
}


def _compile_expr(expr, dim):
    code = compile(expr, "<initial-data>", "eval")
    names = ("x", "y", "z")[:dim]

    def fn(*coords):
        env = dict(zip(names, coords))
        env.update(_EXPR_NAMES)
        out = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - lab tool
        return _bcast(out, sum(np.asarray(c, dtype=float) * 0.0
                               for c in coords))

    return fn


def inline_fields(section, dim):
    """Build AnalyticFields from expression strings (rho, vx..vz, p, bx..bz)."""
    need = ["rho", "p"]
    missing = [k for k in need if k not in section]
    if missing:
        raise ConfigError(f"inline problem missing keys: {missing}")

    def get(key, default="0"):
        return _compile_expr(section.get(key, default), dim)

    rho = get("rho")
    prs = get("p")
    comps_v = [get(k) for k in ("vx", "vy", "vz")]
    comps_b = [get(k) for k in ("bx", "by", "bz")]
    return AnalyticFields(
        rho=rho,
        velocity=lambda *c: np.stack([f(*c) for f in comps_v], axis=-1),
        pressure=prs,
        bfield=lambda *c: np.stack([f(*c) for f in comps_b], axis=-1),
    )


def _parse_cells(text):
    return tuple(int(part) for part in str(text).replace(" ", "").split(","))


def load_config(path):
    """Parse an INI run configuration; raises ConfigError with locations."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")
    if "run" not in parser:
        raise ConfigError(f"{path}: missing [run] section")
    run = parser["run"]
    kwargs = {}
    try:
        if "preset" in run:
            kwargs["preset"] = run.get("preset")
        for key in ("scheme", "limiter", "bound", "out"):
            if key in run:
                kwargs[key] = run.get(key)
        for key, cast in (("order", int), ("seed", int),
                          ("snapshot_every", int)):
            if key in run:
                kwargs[key] = cast(run.get(key))
        for key in ("cfl", "tend", "tvb_m"):
            if key in run:
                kwargs[key] = float(run.get(key))
        for key in ("divfree", "strict"):
            if key in run:
                kwargs[key] = run.getboolean(key)
        if "cells" in run:
            kwargs["cells"] = _parse_cells(run.get("cells"))
        params = {}
        for key in ("p", "eps", "chi", "ba"):
            if key in run:
                params[key] = float(run.get(key))
        if params:
            kwargs["params"] = params
    except ValueError as exc:
        raise ConfigError(f"{path} [run]: {exc}") from exc
    if "problem" in parser:
        prob = dict(parser["problem"])
        prob.setdefault("dim", "1")
        kwargs["inline"] = prob
    return RunConfig(**kwargs)
