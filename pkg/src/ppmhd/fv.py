"""First-order Lax-Friedrichs schemes, DDF operators and initialization.

The update along each axis uses the skip-one stencil bound: the viscosity
must strictly exceed max_j alpha(U_{j+1}, U_{j-1}) over every updated cell;
pairing adjacent cells instead would not match the admissibility proof of
the split average.  "standard" viscosity takes the plain max spectral
radius over cells, which is exactly the choice the non-PP probes exploit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import (
    BOUND_ALPHA_SQRT,
    BOUND_STANDARD,
    pair_bound,
    spectral_radius,
    strict_exceed,
)
from .exceptions import (
    InadmissibleStateError,
    MhdDomainError,
    NumericalBlowupError,
)
from .flux import lf_flux
from .grid import CartesianGrid
from .quadrature import gauss_rule
from .states import B_SLC, BX, DEFAULT_TOL, EN, M_SLC, RHO, is_admissible, _ienergy_raw


@dataclass(frozen=True)
class StepReport:
    """Post-step facts used by run logs and diagnostics."""

    dt: float
    alphas: tuple
    min_rho: float
    min_internal_energy: float
    div_sup_before: float
    div_sup_after: float
    admissible: bool


def _require_admissible(grid, eos, tol=DEFAULT_TOL):
    ok = is_admissible(grid.interior, tol)
    if not np.all(ok):
        idx = tuple(int(v) for v in np.argwhere(~ok)[0])
        raise InadmissibleStateError(
            f"inadmissible cell average at interior index {idx}", cell=idx)


def axis_alpha(grid, eos, axis, bound_kind=BOUND_ALPHA_SQRT):
    """Scheme-level viscosity along a 1-based axis.

    Pair kinds: strict exceedance of the skip-one stencil maximum.
    Standard: the exact maximum spectral radius over all cells.
    """
    u = grid.u
    if bound_kind == BOUND_STANDARD:
        return float(np.max(spectral_radius(u, eos, axis)))
    ax = axis - 1
    n = grid.geom.counts[ax]
    g = grid.geom.ghost
    fwd = [slice(None)] * grid.dim
    bwd = [slice(None)] * grid.dim
    fwd[ax] = slice(g + 1, g + n + 1)
    bwd[ax] = slice(g - 1, g + n - 1)
    vals = pair_bound(bound_kind, u[tuple(fwd)], u[tuple(bwd)], eos, axis,
                      check=False)
    return float(strict_exceed(np.max(vals)))


def max_dt(grid, eos, cfl, bound_kind=BOUND_ALPHA_SQRT):
    """(dt, alphas) with dt = cfl / sum_axes(alpha_axis / spacing_axis)."""
    if not 0.0 < cfl <= 1.0:
        raise MhdDomainError(f"cfl must lie in (0, 1], got {cfl}")
    _require_admissible(grid, eos)
    grid.fill_ghosts()
    alphas = tuple(axis_alpha(grid, eos, ax + 1, bound_kind)
                   for ax in range(grid.dim))
    denom = sum(a / d for a, d in zip(alphas, grid.geom.spacings))
    return cfl / denom, alphas


def _face_fluxes(u, eos, axis0, alpha):
    """LF fluxes on all faces along 0-based spatial axis of a padded field."""
    lo = [slice(None)] * (u.ndim - 1)
    hi = [slice(None)] * (u.ndim - 1)
    lo[axis0] = slice(0, -1)
    hi[axis0] = slice(1, None)
    return lf_flux(u[tuple(lo)], u[tuple(hi)], eos, axis0 + 1, alpha)


def _flux_difference(faces, axis0, g, n):
    left = [slice(None)] * (faces.ndim - 1)
    right = [slice(None)] * (faces.ndim - 1)
    right[axis0] = slice(g, g + n)
    left[axis0] = slice(g - 1, g + n - 1)
    return faces[tuple(right)] - faces[tuple(left)]


def _check_blowup(unew):
    bad = ~np.all(np.isfinite(unew), axis=-1)
    if np.any(bad):
        idx = tuple(int(v) for v in np.argwhere(bad)[0])
        raise NumericalBlowupError(
            f"non-finite state produced at interior index {idx}", cell=idx)


def _lf_step(grid, eos, dt, alphas):
    if dt <= 0.0:
        raise MhdDomainError("dt must be positive")
    grid.fill_ghosts()
    g = grid.geom.ghost
    new = np.array(grid.interior)
    for ax in range(grid.dim):
        faces = _face_fluxes(grid.u, eos, ax, alphas[ax])
        # Faces along other axes span padded cells; restrict to interior.
        sel = [slice(g, g + n) for n in grid.geom.counts]
        sel[ax] = slice(None)
        faces = faces[tuple(sel)]
        new -= (dt / grid.geom.spacings[ax]) * _flux_difference(
            faces, ax, g, grid.geom.counts[ax])
    _check_blowup(new)
    return grid.with_interior(new)


def lf_step_1d(grid, eos, dt, alpha):
    """One forward-Euler LF step in 1D; keeps a constant B1 exactly."""
    if grid.dim != 1:
        raise MhdDomainError("lf_step_1d needs a 1D grid")
    return _lf_step(grid, eos, dt, (alpha,))


def lf_step_2d(grid, eos, dt, alpha1, alpha2):
    if grid.dim != 2:
        raise MhdDomainError("lf_step_2d needs a 2D grid")
    return _lf_step(grid, eos, dt, (alpha1, alpha2))


def lf_step_3d(grid, eos, dt, alpha1, alpha2, alpha3):
    if grid.dim != 3:
        raise MhdDomainError("lf_step_3d needs a 3D grid")
    return _lf_step(grid, eos, dt, (alpha1, alpha2, alpha3))


def lf_step(grid, eos, dt, alphas):
    """Dimension-dispatching LF step."""
    return _lf_step(grid, eos, dt, tuple(alphas))


def ddf_residual_field(grid):
    """Centered-difference divergence of cell-averaged B on the interior.

    1D grids report the centered difference of B1 alone (zero when the
    constant-B1 contract holds).
    """
    grid.fill_ghosts()
    g = grid.geom.ghost
    out = np.zeros(grid.geom.counts)
    for ax in range(grid.dim):
        comp = BX + ax
        fwd = [slice(g, g + n) for n in grid.geom.counts]
        bwd = [slice(g, g + n) for n in grid.geom.counts]
        fwd[ax] = slice(g + 1, g + grid.geom.counts[ax] + 1)
        bwd[ax] = slice(g - 1, g + grid.geom.counts[ax] - 1)
        out += (grid.u[tuple(fwd) + (comp,)] - grid.u[tuple(bwd) + (comp,)]) \
            / (2.0 * grid.geom.spacings[ax])
    return out


def _residual_at(grid, index):
    for ax, i in enumerate(index):
        if not 0 <= i < grid.geom.counts[ax]:
            raise MhdDomainError(f"cell index {index} outside the interior")
    return float(ddf_residual_field(grid)[index])


def ddf_residual_2d(grid, i, j):
    if grid.dim != 2:
        raise MhdDomainError("ddf_residual_2d needs a 2D grid")
    return _residual_at(grid, (i, j))


def ddf_residual_3d(grid, i, j, k):
    if grid.dim != 3:
        raise MhdDomainError("ddf_residual_3d needs a 3D grid")
    return _residual_at(grid, (i, j, k))


def divergence_sup(grid):
    """Sup norm of the centered-difference divergence over the interior."""
    return float(np.max(np.abs(ddf_residual_field(grid))))


def _line_nodes(centers, half_width, q):
    """Gauss nodes/weights over [c - half_width, c + half_width] per center;
    weights are normalized so the weighted sum is the average."""
    x, w = gauss_rule(q)
    return centers[:, None] + (2.0 * half_width) * x[None, :], w


def init_cellavg_1d(fields, geom, rules, eos, order=4):
    """Exact (to quadrature) cell averages of 1D analytic initial data."""
    if order < 2:
        raise MhdDomainError("initialization quadrature order must be >= 2")
    if geom.dim != 1:
        raise MhdDomainError("init_cellavg_1d needs 1D geometry")
    xs, w = _line_nodes(geom.centers(0), geom.spacings[0] / 2.0, order)
    rho = fields.rho(xs)
    vel = fields.velocity(xs)
    prs = fields.pressure(xs)
    bfd = fields.bfield(xs)
    interior = np.zeros((geom.counts[0], 8))
    interior[:, RHO] = rho @ w
    for c in range(3):
        interior[:, 1 + c] = (rho * vel[..., c]) @ w
        interior[:, BX + c] = bfd[..., c] @ w
    rho_e = (rho * eos.specific_energy(rho, prs)) @ w
    interior[:, EN] = rho_e + 0.5 * (
        np.sum(interior[:, M_SLC] ** 2, axis=-1) / interior[:, RHO]
        + np.sum(interior[:, B_SLC] ** 2, axis=-1))
    b_const = None
    b1 = interior[:, BX]
    if np.allclose(b1, b1[0], rtol=0.0, atol=1e-13 * max(1.0, abs(float(b1[0])))):
        b_const = float(b1[0])
    return CartesianGrid.from_interior(geom, rules, interior, b_const=b_const)


def init_cellavg_2d(fields, geom, rules, eos, order=4):
    """DDF-compatible second-order-accurate 2D initialization.

    rho, m, B3 and rho*e get exact cell averages; B1 and B2 get line
    averages over spans of doubled width through the cell center, which
    makes the centered-difference divergence vanish exactly for
    divergence-free analytic fields.  E is assembled last from the averaged
    pieces.
    """
    if order < 2:
        raise MhdDomainError("initialization quadrature order must be >= 2")
    if geom.dim != 2:
        raise MhdDomainError("init_cellavg_2d needs 2D geometry")
    nx, ny = geom.counts
    dx, dy = geom.spacings
    cx, cy = geom.centers(0), geom.centers(1)
    gx, w = _line_nodes(cx, dx / 2.0, order)
    gy, _ = _line_nodes(cy, dy / 2.0, order)

    # Tensor evaluation grids: (nx, ny, q, q).
    xq = gx[:, None, :, None]
    yq = gy[None, :, None, :]

    def area_avg(f):
        vals = np.broadcast_to(f(xq, yq), (nx, ny, order, order))
        return np.einsum("ijab,a,b->ij", vals, w, w)

    interior = np.zeros((nx, ny, 8))
    rho_fn = fields.rho
    vel_fn = fields.velocity
    interior[..., RHO] = area_avg(rho_fn)
    for c in range(3):
        interior[..., 1 + c] = area_avg(
            lambda x, y, c=c: rho_fn(x, y) * vel_fn(x, y)[..., c])
    interior[..., BX + 2] = area_avg(lambda x, y: fields.bfield(x, y)[..., 2])
    rho_e = area_avg(
        lambda x, y: rho_fn(x, y) * eos.specific_energy(rho_fn(x, y),
                                                        fields.pressure(x, y)))

    # Doubled-span line averages through the cell centers.
    ydz, wy = _line_nodes(cy, dy, order)  # spans [y_j - dy, y_j + dy]
    xdz, wx = _line_nodes(cx, dx, order)
    b1 = fields.bfield(cx[:, None, None], ydz[None, :, :])[..., 0]
    interior[..., BX] = b1 @ wy
    b2 = fields.bfield(xdz[:, None, :], cy[None, :, None])[..., 1]
    interior[..., BX + 1] = b2 @ wx

    interior[..., EN] = rho_e + 0.5 * (
        np.sum(interior[..., M_SLC] ** 2, axis=-1) / interior[..., RHO]
        + np.sum(interior[..., B_SLC] ** 2, axis=-1))
    return CartesianGrid.from_interior(geom, rules, interior)


def init_cellavg_3d(fields, geom, rules, eos, order=4):
    """3D analogue: each B component gets a doubled-span face average."""
    if order < 2:
        raise MhdDomainError("initialization quadrature order must be >= 2")
    if geom.dim != 3:
        raise MhdDomainError("init_cellavg_3d needs 3D geometry")
    nx, ny, nz = geom.counts
    dx, dy, dz = geom.spacings
    cx, cy, cz = (geom.centers(a) for a in range(3))
    gx, w = _line_nodes(cx, dx / 2.0, order)
    gy, _ = _line_nodes(cy, dy / 2.0, order)
    gz, _ = _line_nodes(cz, dz / 2.0, order)

    xq = gx[:, None, None, :, None, None]
    yq = gy[None, :, None, None, :, None]
    zq = gz[None, None, :, None, None, :]

    def vol_avg(f):
        vals = np.broadcast_to(f(xq, yq, zq), (nx, ny, nz, order, order, order))
        return np.einsum("ijkabc,a,b,c->ijk", vals, w, w, w)

    interior = np.zeros((nx, ny, nz, 8))
    rho_fn, vel_fn = fields.rho, fields.velocity
    interior[..., RHO] = vol_avg(rho_fn)
    for c in range(3):
        interior[..., 1 + c] = vol_avg(
            lambda x, y, z, c=c: rho_fn(x, y, z) * vel_fn(x, y, z)[..., c])
    rho_e = vol_avg(lambda x, y, z: rho_fn(x, y, z) * eos.specific_energy(
        rho_fn(x, y, z), fields.pressure(x, y, z)))

    ydd, wd = _line_nodes(cy, dy, order)
    zdd, _ = _line_nodes(cz, dz, order)
    xdd, _ = _line_nodes(cx, dx, order)

    b1 = fields.bfield(cx[:, None, None, None, None],
                       ydd[None, :, None, :, None],
                       zdd[None, None, :, None, :])[..., 0]
    interior[..., BX] = np.einsum("ijkab,a,b->ijk", b1, wd, wd)
    b2 = fields.bfield(xdd[:, None, None, :, None],
                       cy[None, :, None, None, None],
                       zdd[None, None, :, None, :])[..., 1]
    interior[..., BX + 1] = np.einsum("ijkab,a,b->ijk", b2, wd, wd)
    b3 = fields.bfield(xdd[:, None, None, :, None],
                       ydd[None, :, None, None, :],
                       cz[None, None, :, None, None])[..., 2]
    interior[..., BX + 2] = np.einsum("ijkab,a,b->ijk", b3, wd, wd)

    interior[..., EN] = rho_e + 0.5 * (
        np.sum(interior[..., M_SLC] ** 2, axis=-1) / interior[..., RHO]
        + np.sum(interior[..., B_SLC] ** 2, axis=-1))
    return CartesianGrid.from_interior(geom, rules, interior)


def step_report(grid_after, eos, dt, alphas, div_before, tol=DEFAULT_TOL):
    """Assemble the per-step report for logs."""
    interior = grid_after.interior
    with np.errstate(divide="ignore", invalid="ignore"):
        en = _ienergy_raw(interior)
    return StepReport(
        dt=float(dt),
        alphas=tuple(float(a) for a in alphas),
        min_rho=float(np.min(interior[..., RHO])),
        min_internal_energy=float(np.min(en)),
        div_sup_before=float(div_before),
        div_sup_after=divergence_sup(grid_after),
        admissible=bool(np.all(is_admissible(interior, tol))),
    )
