"""Uniform Cartesian grids with ghost layers and boundary rules.

A grid stores cell data with the component axis last and `ghost` padding
cells on every side of every spatial axis.  Boundary rules per axis are
either the string "periodic" or an (low, high) pair of side rules, each
side being "outflow" (zero-gradient copy) or an InflowRegion that pins a
fixed state over part of the boundary (a jet nozzle) and copies elsewhere.

The same ghost-filling machinery serves finite-volume fields (one value
per cell) and modal DG fields (one coefficient vector per cell): inflow
writes are delegated to a small adapter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigError, MhdDomainError

PERIODIC = "periodic"
OUTFLOW = "outflow"


@dataclass(frozen=True)
class InflowRegion:
    """Fixed-state boundary over the part of a side selected by mask_fn.

    mask_fn receives the transverse cell-center coordinate arrays (none in
    1D, one in 2D, two in 3D) and returns a boolean mask; None pins the
    whole side.
    """

    state: np.ndarray
    mask_fn: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "state",
                           np.asarray(self.state, dtype=float).reshape(8))

    def mask(self, *transverse):
        if self.mask_fn is None:
            shape = np.broadcast(*transverse).shape if transverse else ()
            return np.ones(shape, dtype=bool)
        return np.asarray(self.mask_fn(*transverse), dtype=bool)


def _check_rule(rule):
    if rule == PERIODIC:
        return
    if (isinstance(rule, tuple) and len(rule) == 2 and
            all(s == OUTFLOW or isinstance(s, InflowRegion) for s in rule)):
        return
    raise ConfigError(f"unknown boundary rule {rule!r}")


@dataclass(frozen=True)
class GridGeometry:
    """Cell counts, spacings and the lower corner of the interior domain."""

    counts: tuple
    spacings: tuple
    origin: tuple
    ghost: int = 1

    def __post_init__(self):
        counts = tuple(int(n) for n in np.atleast_1d(self.counts))
        spacings = tuple(float(d) for d in np.atleast_1d(self.spacings))
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "spacings", spacings)
        object.__setattr__(self, "origin", origin)
        if not (len(counts) == len(spacings) == len(origin)):
            raise ConfigError("counts/spacings/origin must have equal length")
        if any(n < 1 for n in counts):
            raise ConfigError("cell counts must be positive")
        if any(d <= 0 for d in spacings):
            raise ConfigError("spacings must be positive")
        if self.ghost < 1:
            raise ConfigError("ghost width must be at least 1")

    @property
    def dim(self):
        return len(self.counts)

    def padded_counts(self):
        return tuple(n + 2 * self.ghost for n in self.counts)

    def centers(self, axis, with_ghosts=False):
        """Cell-center coordinates along an axis (0-based axis index)."""
        n, d, o = self.counts[axis], self.spacings[axis], self.origin[axis]
        if with_ghosts:
            idx = np.arange(-self.ghost, n + self.ghost)
        else:
            idx = np.arange(n)
        return o + (idx + 0.5) * d

    def extent(self, axis):
        return (self.origin[axis],
                self.origin[axis] + self.counts[axis] * self.spacings[axis])


def _interior_slices(geom):
    g = geom.ghost
    return tuple(slice(g, g + n) for n in geom.counts)


def _default_inflow_write(arr, side_index, mask, state):
    """FV adapter: overwrite masked ghost cells with the fixed state."""
    view = arr[side_index]
    view[mask] = state


def fill_ghosts_array(arr, geom, rules, inflow_write=_default_inflow_write):
    """Fill all ghost layers of `arr` in place according to the rules.

    arr has shape (*padded_counts, ...trailing); trailing axes are carried
    along untouched (8 components for FV, 8 x ncoef for DG).
    """
    g = geom.ghost
    for axis, rule in enumerate(rules):
        _check_rule(rule)
        n = geom.counts[axis]
        sl = [slice(None)] * arr.ndim

        def _at(idx):
            out = list(sl)
            out[axis] = idx
            return tuple(out)

        if rule == PERIODIC:
            arr[_at(slice(0, g))] = arr[_at(slice(n, n + g))]
            arr[_at(slice(n + g, n + 2 * g))] = arr[_at(slice(g, 2 * g))]
            continue
        low, high = rule
        # Zero-gradient copy first; inflow overwrites its region after.
        arr[_at(slice(0, g))] = arr[_at(slice(g, g + 1))]
        arr[_at(slice(n + g, n + 2 * g))] = arr[_at(slice(n + g - 1, n + g))]
        for side, rule_side in ((0, low), (1, high)):
            if not isinstance(rule_side, InflowRegion):
                continue
            transverse = [geom.centers(a, with_ghosts=True)
                          for a in range(geom.dim) if a != axis]
            if transverse:
                grids = np.meshgrid(*transverse, indexing="ij")
                mask = rule_side.mask(*grids)
            else:
                mask = rule_side.mask()
            for k in range(g):
                idx = k if side == 0 else n + g + k
                inflow_write(arr, _at(idx), mask, rule_side.state)
    return arr


@dataclass
class CartesianGrid:
    """Cell-averaged conserved field on a uniform mesh with ghost layers."""

    geom: GridGeometry
    rules: tuple
    u: np.ndarray
    b_const: Optional[float] = None  # active B1-constant contract (1D only)

    def __post_init__(self):
        if len(self.rules) != self.geom.dim:
            raise ConfigError("one boundary rule per axis required")
        expected = self.geom.padded_counts() + (8,)
        if self.u.shape != expected:
            raise MhdDomainError(
                f"field shape {self.u.shape} != padded {expected}")

    @classmethod
    def from_interior(cls, geom, rules, interior, b_const=None):
        u = np.zeros(geom.padded_counts() + (8,))
        u[_interior_slices(geom)] = interior
        grid = cls(geom=geom, rules=tuple(rules), u=u, b_const=b_const)
        grid.fill_ghosts()
        return grid

    @property
    def dim(self):
        return self.geom.dim

    @property
    def interior(self):
        return self.u[_interior_slices(self.geom)]

    def fill_ghosts(self):
        fill_ghosts_array(self.u, self.geom, self.rules)
        return self

    def with_interior(self, interior):
        """New grid sharing geometry/rules with replaced interior data."""
        u = np.array(self.u)
        u[_interior_slices(self.geom)] = interior
        out = replace(self, u=u)
        out.fill_ghosts()
        return out

    def copy(self):
        return replace(self, u=np.array(self.u))


def fill_ghosts(grid):
    """Free-function alias matching the operation name."""
    return grid.fill_ghosts()
