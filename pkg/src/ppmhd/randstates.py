"""Randomized admissible states and DDF-compatible random grids.

The sampler spans the fragile regimes the schemes must survive: density
and pressure log-uniform down to 1e-3 and 1e-9, velocities and fields up
to +-10.  Grid builders construct the magnetic field from a discrete
(vector) potential so the centered-difference divergence vanishes to
roundoff on periodic meshes.
"""

from __future__ import annotations

import numpy as np

from .grid import PERIODIC, CartesianGrid, GridGeometry
from .states import B_SLC, EN, M_SLC, RHO


def rng_for(seed):
    return np.random.default_rng(seed)


def random_admissible(rng, n=1, rho_range=(1e-3, 10.0), v_max=10.0,
                      b_max=10.0, p_range=(1e-9, 10.0), gamma=1.4):
    """n admissible gamma-law states, shape (n, 8)."""
    rho = np.exp(rng.uniform(np.log(rho_range[0]), np.log(rho_range[1]), n))
    v = rng.uniform(-v_max, v_max, (n, 3))
    b = rng.uniform(-b_max, b_max, (n, 3))
    p = np.exp(rng.uniform(np.log(p_range[0]), np.log(p_range[1]), n))
    u = np.zeros((n, 8))
    u[:, RHO] = rho
    u[:, M_SLC] = rho[:, None] * v
    u[:, B_SLC] = b
    u[:, EN] = (p / (gamma - 1.0) + 0.5 * rho * np.sum(v * v, axis=-1)
                + 0.5 * np.sum(b * b, axis=-1))
    return u


def _assemble(rho, v, b, p, gamma):
    u = np.zeros(rho.shape + (8,))
    u[..., RHO] = rho
    u[..., M_SLC] = rho[..., None] * v
    u[..., B_SLC] = b
    u[..., EN] = (p / (gamma - 1.0) + 0.5 * rho * np.sum(v * v, axis=-1)
                  + 0.5 * np.sum(b * b, axis=-1))
    return u


def random_grid_1d(rng, n=16, gamma=1.4, b_max=2.0, v_max=2.0):
    """Random admissible periodic 1D grid with a shared constant B1."""
    rho = np.exp(rng.uniform(np.log(0.05), np.log(5.0), n))
    v = rng.uniform(-v_max, v_max, (n, 3))
    b = rng.uniform(-b_max, b_max, (n, 3))
    b[:, 0] = rng.uniform(-b_max, b_max)
    p = np.exp(rng.uniform(np.log(1e-6), np.log(5.0), n))
    interior = _assemble(rho, v, b, p, gamma)
    geom = GridGeometry(counts=(n,), spacings=(1.0 / n,), origin=(0.0,))
    return CartesianGrid.from_interior(geom, (PERIODIC,), interior,
                                       b_const=float(b[0, 0]))


def _skipone_gradient(a, axis, spacing):
    """Centered skip-one difference of a periodic cell-centered array."""
    return (np.roll(a, -1, axis=axis) - np.roll(a, 1, axis=axis)) / (2.0 * spacing)


def random_grid_2d(rng, shape=(12, 12), gamma=1.4, exact_ddf=True,
                   b_max=2.0, v_max=2.0, p_range=(1e-6, 5.0)):
    """Random admissible periodic 2D grid.

    exact_ddf=True derives (B1, B2) from a scalar potential so the
    centered-difference divergence vanishes to roundoff; otherwise B is
    free and the divergence is whatever it is.
    """
    nx, ny = shape
    dx, dy = 1.0 / nx, 1.0 / ny
    rho = np.exp(rng.uniform(np.log(0.05), np.log(5.0), shape))
    v = rng.uniform(-v_max, v_max, shape + (3,))
    p = np.exp(rng.uniform(np.log(p_range[0]), np.log(p_range[1]), shape))
    if exact_ddf:
        pot = rng.uniform(-b_max, b_max, shape)
        b = np.zeros(shape + (3,))
        b[..., 0] = _skipone_gradient(pot, 1, dy)
        b[..., 1] = -_skipone_gradient(pot, 0, dx)
        b[..., 2] = rng.uniform(-b_max, b_max, shape)
    else:
        b = rng.uniform(-b_max, b_max, shape + (3,))
    interior = _assemble(rho, v, b, p, gamma)
    geom = GridGeometry(counts=shape, spacings=(dx, dy), origin=(0.0, 0.0))
    return CartesianGrid.from_interior(geom, (PERIODIC, PERIODIC), interior)


def random_grid_3d(rng, shape=(8, 8, 8), gamma=1.4, exact_ddf=True,
                   b_max=2.0, v_max=2.0):
    """Random admissible periodic 3D grid, optionally exactly DDF."""
    nx, ny, nz = shape
    d = (1.0 / nx, 1.0 / ny, 1.0 / nz)
    rho = np.exp(rng.uniform(np.log(0.05), np.log(5.0), shape))
    v = rng.uniform(-v_max, v_max, shape + (3,))
    p = np.exp(rng.uniform(np.log(1e-6), np.log(5.0), shape))
    if exact_ddf:
        pot = rng.uniform(-b_max, b_max, shape + (3,))
        b = np.zeros(shape + (3,))
        b[..., 0] = (_skipone_gradient(pot[..., 2], 1, d[1])
                     - _skipone_gradient(pot[..., 1], 2, d[2]))
        b[..., 1] = (_skipone_gradient(pot[..., 0], 2, d[2])
                     - _skipone_gradient(pot[..., 2], 0, d[0]))
        b[..., 2] = (_skipone_gradient(pot[..., 1], 0, d[0])
                     - _skipone_gradient(pot[..., 0], 1, d[1]))
    else:
        b = rng.uniform(-b_max, b_max, shape + (3,))
    interior = _assemble(rho, v, b, p, gamma)
    geom = GridGeometry(counts=shape, spacings=d, origin=(0.0, 0.0, 0.0))
    return CartesianGrid.from_interior(geom, (PERIODIC,) * 3, interior)
