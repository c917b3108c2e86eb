"""Modal DG fields, cell-average updates, limiters and SSP-RK3.

Polynomials live on the reference cell [-1/2, 1/2]^dim in a tensor Legendre
basis whose first coefficient is the cell average.  Degrees 0..2 are
supported; degree 0 degenerates exactly to the first-order LF scheme.

Positivity machinery: node admissibility is enforced at the mixed
Lobatto-by-Gauss tensor sets entering the cell-average decomposition, via a
two-stage scaling limiter (density first, then the full deviation vector
using concavity of the internal energy).  The limiter never changes cell
averages.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property, lru_cache

import numpy as np

from .bounds import BOUND_ALPHA_SQRT, BOUND_STANDARD, pair_bound, spectral_radius, strict_exceed
from .exceptions import (
    InadmissibleStateError,
    InvariantViolationError,
    MhdDomainError,
    NumericalBlowupError,
    PreconditionError,
)
from .flux import lf_flux, physical_flux
from .grid import GridGeometry, fill_ghosts_array
from .quadrature import tables_for_degree
from .states import (
    B_SLC,
    BX,
    BY,
    EN,
    IdealGasEos,
    M_SLC,
    RHO,
    AdmissibilityTolerance,
    _ienergy_raw,
    is_admissible,
)

MAX_DEGREE = 2

# 1D Legendre-style modes on [-1/2, 1/2] and their L2 masses.
_MASS_1D = (1.0, 1.0 / 12.0, 1.0 / 180.0)


def _leg(j, x):
    if j == 0:
        return np.ones_like(x)
    if j == 1:
        return x
    if j == 2:
        return x * x - 1.0 / 12.0
    raise MhdDomainError(f"mode degree {j} unsupported")


def _dleg(j, x):
    if j == 0:
        return np.zeros_like(x)
    if j == 1:
        return np.ones_like(x)
    if j == 2:
        return 2.0 * x
    raise MhdDomainError(f"mode degree {j} unsupported")


def modes_1d(k):
    return list(range(k + 1))


def modes_2d(k):
    """Total-degree-<=k tensor modes, average first."""
    out = []
    for total in range(k + 1):
        for a in range(total, -1, -1):
            out.append((a, total - a))
    return out


def n_coeffs(dim, k):
    return k + 1 if dim == 1 else (k + 1) * (k + 2) // 2


def _eval_matrix_1d(k, xi):
    xi = np.asarray(xi, dtype=float)
    return np.stack([_leg(j, xi) for j in modes_1d(k)])


def _eval_matrix_2d(k, xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.stack([_leg(a, xi) * _leg(b, eta) for a, b in modes_2d(k)])


@dataclass(frozen=True)
class DgBasis:
    """Precomputed node/derivative tables for one (dim, degree) pair.

    Interface traces and positivity nodes use the (k+1)-point Gauss rule
    the cell-average analysis is built on; the cell volume integral of the
    nonlinear flux uses the same count (the volume term never enters the
    cell-average update).
    """

    dim: int
    k: int

    @cached_property
    def tables(self):
        return tables_for_degree(self.k)

    @cached_property
    def mass(self):
        if self.dim == 1:
            return np.array([_MASS_1D[j] for j in modes_1d(self.k)])
        return np.array([_MASS_1D[a] * _MASS_1D[b] for a, b in modes_2d(self.k)])

    @cached_property
    def vol_rule(self):
        from .quadrature import gauss_rule
        return gauss_rule(self.k + 1)

    # --- 1D node sets -------------------------------------------------
    @cached_property
    def phi_lobatto(self):
        return _eval_matrix_1d(self.k, self.tables.lobatto_x)

    @cached_property
    def phi_gauss(self):
        return _eval_matrix_1d(self.k, self.vol_rule[0])

    @cached_property
    def dphi_gauss(self):
        return np.stack([_dleg(j, self.vol_rule[0]) for j in modes_1d(self.k)])

    @cached_property
    def phi_faces(self):
        """Columns: value vectors at xi = -1/2 and xi = +1/2."""
        return _eval_matrix_1d(self.k, np.array([-0.5, 0.5]))

    # --- 2D node sets -------------------------------------------------
    @cached_property
    def phi_face_x(self):
        """(minus, plus) x-face trace matrices, each (nc, Q)."""
        eta = self.tables.gauss_x
        return (_eval_matrix_2d(self.k, np.full_like(eta, -0.5), eta),
                _eval_matrix_2d(self.k, np.full_like(eta, 0.5), eta))

    @cached_property
    def phi_face_y(self):
        xi = self.tables.gauss_x
        return (_eval_matrix_2d(self.k, xi, np.full_like(xi, -0.5)),
                _eval_matrix_2d(self.k, xi, np.full_like(xi, 0.5)))

    @cached_property
    def volume_nodes(self):
        g = self.vol_rule[0]
        xi, eta = np.meshgrid(g, g, indexing="ij")
        return xi.ravel(), eta.ravel()

    @cached_property
    def volume_weights(self):
        w = self.vol_rule[1]
        return np.outer(w, w).ravel()

    @cached_property
    def phi_volume(self):
        return _eval_matrix_2d(self.k, *self.volume_nodes)

    @cached_property
    def dphi_volume(self):
        xi, eta = self.volume_nodes
        dxi = np.stack([_dleg(a, xi) * _leg(b, eta) for a, b in modes_2d(self.k)])
        deta = np.stack([_leg(a, xi) * _dleg(b, eta) for a, b in modes_2d(self.k)])
        return dxi, deta

    # Weight-premultiplied matrices: X @ w_mat contracts quadrature sums
    # through BLAS instead of einsum.
    @cached_property
    def wdphi_gauss(self):
        return (self.dphi_gauss * self.vol_rule[1]).T.copy()

    @cached_property
    def wdphi_volume(self):
        dxi, deta = self.dphi_volume
        w = self.volume_weights
        return (dxi * w).T.copy(), (deta * w).T.copy()

    @cached_property
    def wphi_face_x(self):
        gw = self.tables.gauss_w
        return tuple((m * gw).T.copy() for m in self.phi_face_x)

    @cached_property
    def wphi_face_y(self):
        gw = self.tables.gauss_w
        return tuple((m * gw).T.copy() for m in self.phi_face_y)

    @cached_property
    def pp_nodes(self):
        """Nodes where the limiter enforces positivity: the decomposition
        sets the provable conditions live on (Lobatto in 1D; Lobatto x Gauss
        union Gauss x Lobatto in 2D) plus the volume quadrature nodes so the
        nonlinear flux is only ever evaluated at positive states."""
        if self.dim == 1:
            return (np.concatenate([self.tables.lobatto_x,
                                    self.vol_rule[0]]),)
        lx = self.tables.lobatto_x
        gx = self.tables.gauss_x
        a_xi, a_eta = np.meshgrid(lx, gx, indexing="ij")
        b_xi, b_eta = np.meshgrid(gx, lx, indexing="ij")
        v_xi, v_eta = self.volume_nodes
        xi = np.concatenate([a_xi.ravel(), b_xi.ravel(), v_xi])
        eta = np.concatenate([a_eta.ravel(), b_eta.ravel(), v_eta])
        return xi, eta

    @cached_property
    def phi_pp(self):
        if self.dim == 1:
            return _eval_matrix_1d(self.k, self.pp_nodes[0])
        return _eval_matrix_2d(self.k, *self.pp_nodes)

    @cached_property
    def phi_decomp(self):
        """The pure decomposition node set of the admissibility conditions
        (no volume nodes); what strict mode validates."""
        if self.dim == 1:
            return self.phi_lobatto
        lx = self.tables.lobatto_x
        gx = self.tables.gauss_x
        a_xi, a_eta = np.meshgrid(lx, gx, indexing="ij")
        b_xi, b_eta = np.meshgrid(gx, lx, indexing="ij")
        xi = np.concatenate([a_xi.ravel(), b_xi.ravel()])
        eta = np.concatenate([a_eta.ravel(), b_eta.ravel()])
        return _eval_matrix_2d(self.k, xi, eta)


@lru_cache(maxsize=None)
def basis_for(dim, k):
    if not 0 <= k <= MAX_DEGREE:
        raise MhdDomainError(f"DG degree must be in 0..{MAX_DEGREE}")
    if dim not in (1, 2):
        raise MhdDomainError("DG fields support 1D and 2D")
    return DgBasis(dim=dim, k=k)


def _dg_inflow_write(arr, idx, mask, state):
    """Ghost write for modal data: constant polynomial of the pinned state."""
    view = arr[idx]
    view[mask] = 0.0
    view[mask, :, 0] = state


@dataclass
class DgField:
    """Modal conserved field: coef has shape (*padded_counts, 8, ncoef)."""

    geom: GridGeometry
    rules: tuple
    k: int
    coef: np.ndarray

    def __post_init__(self):
        expected = self.geom.padded_counts() + (8, n_coeffs(self.geom.dim, self.k))
        if self.coef.shape != expected:
            raise MhdDomainError(
                f"coefficient shape {self.coef.shape} != expected {expected}")

    @property
    def dim(self):
        return self.geom.dim

    @property
    def basis(self):
        return basis_for(self.dim, self.k)

    def _interior_slices(self):
        g = self.geom.ghost
        return tuple(slice(g, g + n) for n in self.geom.counts)

    @property
    def interior_coef(self):
        return self.coef[self._interior_slices()]

    @property
    def cell_averages(self):
        return self.interior_coef[..., 0]

    def fill_ghosts(self):
        fill_ghosts_array(self.coef, self.geom, self.rules,
                          inflow_write=_dg_inflow_write)
        return self

    def with_interior(self, interior_coef):
        coef = np.array(self.coef)
        coef[self._interior_slices()] = interior_coef
        out = replace(self, coef=coef)
        out.fill_ghosts()
        return out

    def copy(self):
        return replace(self, coef=np.array(self.coef))

    def eval_nodes(self, phi):
        """Evaluate at a node matrix (nc, N) -> (*padded, 8, N)."""
        coef = self.coef
        if coef.flags.c_contiguous:
            nc = coef.shape[-1]
            flat = coef.reshape(-1, nc) @ phi
            return flat.reshape(coef.shape[:-1] + (phi.shape[-1],))
        return coef @ phi

    @classmethod
    def from_cell_averages(cls, geom, rules, averages, k):
        coef = np.zeros(geom.padded_counts() + (8, n_coeffs(geom.dim, k)))
        g = geom.ghost
        sl = tuple(slice(g, g + n) for n in geom.counts)
        coef[sl + (slice(None), 0)] = averages
        fld = cls(geom=geom, rules=tuple(rules), k=k, coef=coef)
        fld.fill_ghosts()
        return fld


@dataclass(frozen=True)
class DgCellPoly:
    """One cell's modal polynomial with cached node traces."""

    dim: int
    k: int
    coef: np.ndarray  # (8, ncoef)

    def __post_init__(self):
        coef = np.asarray(self.coef, dtype=float)
        if coef.shape != (8, n_coeffs(self.dim, self.k)):
            raise MhdDomainError("coefficient block has wrong shape")
        object.__setattr__(self, "coef", coef)

    @property
    def basis(self):
        return basis_for(self.dim, self.k)

    @property
    def cell_average(self):
        return self.coef[:, 0]

    def evaluate(self, *points):
        if self.dim == 1:
            phi = _eval_matrix_1d(self.k, points[0])
        else:
            phi = _eval_matrix_2d(self.k, points[0], points[1])
        return self.coef @ phi

    @cached_property
    def traces(self):
        """Cached values at the decomposition and interface node sets."""
        b = self.basis
        out = {"pp": self.coef @ b.phi_pp}
        if self.dim == 1:
            out["faces"] = self.coef @ b.phi_faces
        else:
            out["face_x"] = tuple(self.coef @ m for m in b.phi_face_x)
            out["face_y"] = tuple(self.coef @ m for m in b.phi_face_y)
        return out


@dataclass(frozen=True)
class LimiterConfig:
    """Positivity floors, TVB constant and chain selection."""

    eps_rho: float = 1e-13
    eps_e: float = 1e-13
    tvb_m: float = 0.0
    chain: str = "pp"  # none | pp | pp+tvb

    def __post_init__(self):
        if not (self.eps_rho > 0 and self.eps_e > 0):
            raise MhdDomainError("limiter floors must be positive")
        if self.chain not in ("none", "pp", "pp+tvb"):
            raise MhdDomainError(f"unknown limiter chain {self.chain!r}")

    @property
    def floors(self):
        return AdmissibilityTolerance(self.eps_rho, self.eps_e)


# ----------------------------------------------------------------------
# Projection / initialization
# ----------------------------------------------------------------------

def l2_project(fields, geom, rules, k, eos, order=6):
    """L2 projection of analytic primitive data onto a modal DG field."""
    from .quadrature import gauss_rule

    basis = basis_for(geom.dim, k)
    x, w = gauss_rule(max(order, k + 2))
    q = len(x)

    def conserved_at(*coords):
        rho = fields.rho(*coords)
        vel = fields.velocity(*coords)
        prs = fields.pressure(*coords)
        bfd = fields.bfield(*coords)
        shape = np.broadcast_shapes(np.shape(rho), np.shape(prs))
        u = np.zeros(shape + (8,))
        u[..., RHO] = rho
        for c in range(3):
            u[..., 1 + c] = rho * vel[..., c]
            u[..., BX + c] = bfd[..., c]
        u[..., EN] = (rho * eos.specific_energy(rho, prs)
                      + 0.5 * rho * np.sum(vel * vel, axis=-1)
                      + 0.5 * np.sum(bfd * bfd, axis=-1))
        return u

    if geom.dim == 1:
        nx = geom.counts[0]
        xs = geom.centers(0)[:, None] + geom.spacings[0] * x[None, :]
        uq = conserved_at(xs)  # (nx, q, 8)
        phi = _eval_matrix_1d(k, x)  # (nc, q)
        raw = np.einsum("iqc,nq,q->icn", uq, phi, w)
        interior = raw / basis.mass
    else:
        nx, ny = geom.counts
        xs = geom.centers(0)[:, None] + geom.spacings[0] * x[None, :]
        ys = geom.centers(1)[:, None] + geom.spacings[1] * x[None, :]
        uq = conserved_at(xs[:, None, :, None], ys[None, :, None, :])
        xi, eta = np.meshgrid(x, x, indexing="ij")
        phi = _eval_matrix_2d(k, xi.ravel(), eta.ravel())  # (nc, q*q)
        uq = uq.reshape(nx, ny, q * q, 8)
        wq = np.outer(w, w).ravel()
        raw = np.einsum("ijqc,nq,q->ijcn", uq, phi, wq)
        interior = raw / basis.mass
    return DgField(geom=geom, rules=tuple(rules), k=k,
                   coef=_padded(interior, geom)).fill_ghosts()


def _padded(interior, geom):
    coef = np.zeros(geom.padded_counts() + interior.shape[geom.dim:])
    g = geom.ghost
    coef[tuple(slice(g, g + n) for n in geom.counts)] = interior
    return coef


# Mode indices of the 2D basis used by the divergence-free constraints.
_DF_CONSTRAINTS_K1 = (((1,), (2,), 1.0, 1.0),)  # (c1 idx, c2 idx, fac1, fac2)


def project_b_divfree_2d(field: DgField, in_place=False) -> DgField:
    """Cellwise L2 projection of (B1, B2) onto divergence-free polynomials.

    The per-cell constraint div B = (1/dx) dB1/dxi + (1/dy) dB2/deta = 0
    couples disjoint coefficient pairs, so the projection reduces to
    independent mass-weighted rank-one corrections.  Cell averages are the
    constant modes and are never touched.  No-op at degree 0.
    """
    if field.dim != 2:
        raise MhdDomainError("project_b_divfree_2d needs a 2D field")
    if field.k == 0:
        return field
    dx, dy = field.geom.spacings
    mass = field.basis.mass
    coef = field.coef if in_place else np.array(field.coef)
    b1 = coef[..., BX, :]
    b2 = coef[..., BY, :]

    # (b1 mode, b2 mode, derivative factor of each) pairs per constraint.
    constraints = [((1, 1.0), (2, 1.0))]
    if field.k == 2:
        constraints += [((3, 2.0), (4, 1.0)), ((4, 1.0), (5, 2.0))]
    for (i1, f1), (i2, f2) in constraints:
        a1 = f1 / dx
        a2 = f2 / dy
        val = a1 * b1[..., i1] + a2 * b2[..., i2]
        denom = a1 * a1 / mass[i1] + a2 * a2 / mass[i2]
        b1[..., i1] -= (a1 / mass[i1]) * val / denom
        b2[..., i2] -= (a2 / mass[i2]) * val / denom
    out = field if in_place else replace(field, coef=coef)
    out.fill_ghosts()
    return out


# ----------------------------------------------------------------------
# Positivity limiter
# ----------------------------------------------------------------------

def _pp_limit_coef(coef, eos, floors, basis):
    """Two-stage scaling on a coefficient block (..., 8, nc); in place."""
    from . import _kernels

    eps_rho, eps_e = floors.eps_rho, floors.eps_e
    if (_kernels.HAVE_NUMBA and coef.size >= 8192
            and np.all(np.isfinite(coef))):
        bad = _kernels.fused_pp_limit(coef, basis.phi_pp, basis.phi_decomp,
                                      eps_rho, eps_e)
        if bad is not None:
            raise InadmissibleStateError(
                f"positivity limiter needs admissible cell averages; "
                f"cell {bad}", cell=bad)
        return coef
    avg = coef[..., 0]
    avg_ok = is_admissible(avg, AdmissibilityTolerance(eps_rho, eps_e))
    if not np.all(avg_ok):
        idx = tuple(int(v) for v in np.argwhere(~avg_ok)[0])
        raise InadmissibleStateError(
            f"positivity limiter needs admissible cell averages; cell {idx}",
            cell=idx)
    if coef.shape[-1] == 1:
        return coef

    rho_nodes = coef[..., RHO, :] @ basis.phi_pp  # (..., Next)
    rho_avg = avg[..., RHO]
    rho_min = np.min(rho_nodes, axis=-1)
    need = rho_min < eps_rho
    with np.errstate(divide="ignore", invalid="ignore"):
        theta1 = np.where(
            need & (rho_avg > rho_min),
            (rho_avg - eps_rho) / (rho_avg - rho_min),
            1.0)
    theta1 = np.clip(theta1, 0.0, 1.0)
    coef[..., RHO, 1:] *= theta1[..., None]

    nodes = coef @ basis.phi_decomp  # (..., 8, N)
    en_nodes = _ienergy_raw(np.moveaxis(nodes, -2, -1))  # (..., N)
    en_avg = _ienergy_raw(avg)
    viol = en_nodes < eps_e
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(viol,
                          (en_avg[..., None] - eps_e)
                          / (en_avg[..., None] - en_nodes),
                          1.0)
    theta2 = np.clip(np.min(ratios, axis=-1), 0.0, 1.0)
    coef[..., 1:] *= theta2[..., None, None]
    return coef


def pp_limiter(poly: DgCellPoly, eos, floors=None) -> DgCellPoly:
    """Scale one cell polynomial toward its average until every
    decomposition node has positive density and internal energy."""
    floors = floors or AdmissibilityTolerance()
    coef = np.array(poly.coef)[None]
    _pp_limit_coef(coef, eos, floors, poly.basis)
    return DgCellPoly(dim=poly.dim, k=poly.k, coef=coef[0])


def pp_limit_field(field: DgField, eos, floors=None, in_place=False) -> DgField:
    """Apply the positivity limiter to every interior cell of a field."""
    floors = floors or AdmissibilityTolerance()
    out = field if in_place else field.copy()
    _pp_limit_coef(out.interior_coef, eos, floors, field.basis)
    out.fill_ghosts()
    return out


# ----------------------------------------------------------------------
# TVB minmod limiter
# ----------------------------------------------------------------------

def _tvb_minmod(a, b, c, threshold):
    keep = np.abs(a) <= threshold
    same = (np.sign(a) == np.sign(b)) & (np.sign(a) == np.sign(c))
    mm = np.where(same, np.sign(a) * np.minimum(np.abs(a),
                                                np.minimum(np.abs(b), np.abs(c))), 0.0)
    return np.where(keep, a, mm)


def _axis_jacobian(u, eos, axis, h=1e-6):
    """Finite-difference flux Jacobian dF_axis/dU at one state."""
    scale = np.maximum(np.abs(u), 1.0) * h
    jac = np.empty((8, 8))
    for col in range(8):
        up = np.array(u)
        um = np.array(u)
        up[col] += scale[col]
        um[col] -= scale[col]
        jac[:, col] = (physical_flux(up, eos, axis)
                       - physical_flux(um, eos, axis)) / (2.0 * scale[col])
    return jac


def tvb_minmod_limiter(field: DgField, m=0.0, characteristic=False,
                       eos=None) -> DgField:
    """Slope limiting with a TVB threshold m * dx^2 per direction.

    Cell averages are untouched.  A cell is rebuilt as a limited linear
    polynomial only when one of its face-center deviations is modified by
    the TVB minmod against neighbor average differences.  With
    characteristic=True the comparison runs in the eigenvector frame of the
    flux Jacobian frozen at each cell average (numerically computed);
    ill-conditioned frames fall back to componentwise limiting.
    """
    if field.k == 0:
        return field.copy()
    if characteristic and eos is None:
        raise MhdDomainError("characteristic limiting needs the EOS")
    field.fill_ghosts()
    out = field.copy()
    if field.dim == 1:
        _tvb_1d(out, m, characteristic, eos)
    else:
        _tvb_2d(out, m, characteristic, eos)
    out.fill_ghosts()
    return out


def _char_transform(avg, eos, axis):
    jac = _axis_jacobian(avg, eos, axis)
    vals, right = np.linalg.eig(jac)
    if np.max(np.abs(vals.imag)) > 1e-7 * max(1.0, np.max(np.abs(vals.real))):
        return None, None
    right = right.real
    if np.linalg.cond(right) > 1e8:
        return None, None
    return right, np.linalg.inv(right)


def _tvb_1d(field, m, characteristic, eos):
    g = field.geom.ghost
    n = field.geom.counts[0]
    dx = field.geom.spacings[0]
    coef = field.coef
    avg = coef[..., 0]
    dp = avg[g + 1:g + n + 1] - avg[g:g + n]
    dm = avg[g:g + n] - avg[g - 1:g + n - 1]
    c = coef[g:g + n]
    threshold = m * dx * dx

    if not characteristic:
        _tvb_apply_1d(c, dp, dm, threshold)
        return
    for j in range(n):
        right, left = _char_transform(c[j, :, 0], eos, 1)
        if right is None:
            _tvb_apply_1d(c[j:j + 1], dp[j:j + 1], dm[j:j + 1], threshold)
            continue
        cw = np.einsum("rc,cn->rn", left, c[j])
        _tvb_apply_1d(cw[None], (left @ dp[j])[None], (left @ dm[j])[None],
                      threshold)
        c[j] = np.einsum("cr,rn->cn", right, cw)


def _tvb_apply_1d(c, dp, dm, threshold):
    """Componentwise TVB on stacked cells: c (..., 8, nc)."""
    phi_r = _eval_matrix_1d(c.shape[-1] - 1, np.array([0.5]))[:, 0]
    phi_l = _eval_matrix_1d(c.shape[-1] - 1, np.array([-0.5]))[:, 0]
    du_r = np.einsum("...cn,n->...c", c, phi_r) - c[..., 0]
    du_l = c[..., 0] - np.einsum("...cn,n->...c", c, phi_l)
    mr = _tvb_minmod(du_r, dp, dm, threshold)
    ml = _tvb_minmod(du_l, dp, dm, threshold)
    limited = (mr != du_r) | (ml != du_l)
    if not np.any(limited):
        return
    new_slope = _tvb_minmod(c[..., 1], dp, dm, threshold)
    c[..., 1] = np.where(limited, new_slope, c[..., 1])
    if c.shape[-1] > 2:
        c[..., 2:] = np.where(limited[..., None], 0.0, c[..., 2:])


def _tvb_2d(field, m, characteristic, eos):
    g = field.geom.ghost
    nx, ny = field.geom.counts
    dx, dy = field.geom.spacings
    coef = field.coef
    avg = coef[..., 0]
    c = coef[g:g + nx, g:g + ny]
    dpx = avg[g + 1:g + nx + 1, g:g + ny] - avg[g:g + nx, g:g + ny]
    dmx = avg[g:g + nx, g:g + ny] - avg[g - 1:g + nx - 1, g:g + ny]
    dpy = avg[g:g + nx, g + 1:g + ny + 1] - avg[g:g + nx, g:g + ny]
    dmy = avg[g:g + nx, g:g + ny] - avg[g:g + nx, g - 1:g + ny - 1]

    if characteristic:
        for i in range(nx):
            for j in range(ny):
                blk = c[i:i + 1, j:j + 1]
                done = False
                rx, lx = _char_transform(c[i, j, :, 0], eos, 1)
                ry, ly = _char_transform(c[i, j, :, 0], eos, 2)
                if rx is not None and ry is not None:
                    _tvb_apply_2d_char(c, i, j, (rx, lx), (ry, ly),
                                       dpx[i, j], dmx[i, j], dpy[i, j],
                                       dmy[i, j], m * dx * dx, m * dy * dy,
                                       field.k)
                    done = True
                if not done:
                    _tvb_apply_2d(blk, dpx[i:i + 1, j:j + 1],
                                  dmx[i:i + 1, j:j + 1], dpy[i:i + 1, j:j + 1],
                                  dmy[i:i + 1, j:j + 1], m * dx * dx,
                                  m * dy * dy, field.k)
        return
    _tvb_apply_2d(c, dpx, dmx, dpy, dmy, m * dx * dx, m * dy * dy, field.k)


def _face_center_matrices(k):
    z = np.array([0.0])
    return (_eval_matrix_2d(k, np.array([0.5]), z)[:, 0],
            _eval_matrix_2d(k, np.array([-0.5]), z)[:, 0],
            _eval_matrix_2d(k, z, np.array([0.5]))[:, 0],
            _eval_matrix_2d(k, z, np.array([-0.5]))[:, 0])


def _tvb_apply_2d(c, dpx, dmx, dpy, dmy, thr_x, thr_y, k):
    pr, pl, pt, pb = _face_center_matrices(k)
    avg = c[..., 0]
    dev = {
        "r": np.einsum("...cn,n->...c", c, pr) - avg,
        "l": avg - np.einsum("...cn,n->...c", c, pl),
        "t": np.einsum("...cn,n->...c", c, pt) - avg,
        "b": avg - np.einsum("...cn,n->...c", c, pb),
    }
    lim_x = ((_tvb_minmod(dev["r"], dpx, dmx, thr_x) != dev["r"])
             | (_tvb_minmod(dev["l"], dpx, dmx, thr_x) != dev["l"]))
    lim_y = ((_tvb_minmod(dev["t"], dpy, dmy, thr_y) != dev["t"])
             | (_tvb_minmod(dev["b"], dpy, dmy, thr_y) != dev["b"]))
    limited = lim_x | lim_y
    if not np.any(limited):
        return
    sx = _tvb_minmod(c[..., 1], dpx, dmx, thr_x)
    sy = _tvb_minmod(c[..., 2], dpy, dmy, thr_y)
    c[..., 1] = np.where(limited, sx, c[..., 1])
    c[..., 2] = np.where(limited, sy, c[..., 2])
    if c.shape[-1] > 3:
        c[..., 3:] = np.where(limited[..., None], 0.0, c[..., 3:])


def _tvb_apply_2d_char(c, i, j, xt, yt, dpx, dmx, dpy, dmy, thr_x, thr_y, k):
    rx, lx = xt
    ry, ly = yt
    blk = c[i, j]
    wx = lx @ blk
    limited_before = np.array(wx)
    _tvb_apply_2d(wx[None], (lx @ dpx)[None], (lx @ dmx)[None],
                  (lx @ dpy)[None], (lx @ dmy)[None], thr_x, thr_y, k)
    if not np.allclose(wx, limited_before):
        c[i, j] = rx @ wx
        blk = c[i, j]
    wy = ly @ blk
    limited_before = np.array(wy)
    _tvb_apply_2d(wy[None], (ly @ dpx)[None], (ly @ dmx)[None],
                  (ly @ dpy)[None], (ly @ dmy)[None], thr_x, thr_y, k)
    if not np.allclose(wy, limited_before):
        c[i, j] = ry @ wy


# ----------------------------------------------------------------------
# Cell-average updates (forward Euler stage operators)
# ----------------------------------------------------------------------

def _trace_pairs(field):
    """Same-side trace pairs of adjacent cells per axis (for the bounds)."""
    basis = field.basis
    if field.dim == 1:
        tr = field.eval_nodes(basis.phi_faces)
        ul, ur = tr[..., 0], tr[..., 1]
        return [[(ur[1:], ur[:-1]), (ul[1:], ul[:-1])]]
    xm, xp = basis.phi_face_x
    ym, yp = basis.phi_face_y
    ul = np.moveaxis(field.eval_nodes(xm), -1, 0)  # (Q, nxp, nyp, 8)
    ur = np.moveaxis(field.eval_nodes(xp), -1, 0)
    ub = np.moveaxis(field.eval_nodes(ym), -1, 0)
    ut = np.moveaxis(field.eval_nodes(yp), -1, 0)
    return [
        [(ur[:, 1:], ur[:, :-1]), (ul[:, 1:], ul[:, :-1])],
        [(ut[:, :, 1:], ut[:, :, :-1]), (ub[:, :, 1:], ub[:, :, :-1])],
    ]


def dg_axis_alphas(field: DgField, eos, bound_kind=BOUND_ALPHA_SQRT):
    """Per-axis viscosities from same-side trace pairs of adjacent cells."""
    field.fill_ghosts()
    return tuple(_alpha_from_pairs(pairs, eos, axis + 1, bound_kind)
                 for axis, pairs in enumerate(_trace_pairs(field)))


def _controls_from_quantities(fams, axis0):
    """(bound, spect) maxima from two same-axis trace families, pairing
    adjacent cells along spatial axis axis0 of the precomputed data."""
    from .bounds import alpha_sqrt_pair

    lo = [slice(None)] * 4
    hi = [slice(None)] * 4
    lo[1 + axis0] = slice(None, -1)
    hi[1 + axis0] = slice(1, None)
    bound = 0.0
    spect = 0.0
    for q in fams:
        qa = q.sliced(tuple(hi[:q.vi.ndim]))
        qb = q.sliced(tuple(lo[:q.vi.ndim]))
        bound = max(bound, float(np.max(alpha_sqrt_pair(qa, qb))))
        spect = max(spect, float(np.max(np.abs(q.vi) + q.cfull)))
    return bound, spect


def dg_step_controls(field: DgField, eos, bound_kind=BOUND_ALPHA_SQRT):
    """(bound alphas, spectral-radius alphas) sharing one trace pass.

    The default sqrt-weighted bound takes a fused path that evaluates the
    per-family speed quantities once; other kinds go through the generic
    pairwise evaluators.
    """
    from . import _kernels
    from .bounds import speed_quantities

    field.fill_ghosts()
    if (bound_kind == BOUND_ALPHA_SQRT and field.dim == 2
            and _kernels.HAVE_NUMBA and isinstance(eos, IdealGasEos)
            and field.coef.size >= 8192):
        fused = _kernels.fused_dg2d_controls(field.coef, field.basis,
                                             eos.gamma)
        if fused is not None:
            bound, spect = fused
            return tuple(float(strict_exceed(b)) for b in bound), spect
    if bound_kind != BOUND_ALPHA_SQRT:
        all_pairs = _trace_pairs(field)
        bound = tuple(_alpha_from_pairs(pairs, eos, axis + 1, bound_kind)
                      for axis, pairs in enumerate(all_pairs))
        if bound_kind == BOUND_STANDARD:
            return bound, bound
        spect = tuple(_alpha_from_pairs(pairs, eos, axis + 1, BOUND_STANDARD)
                      for axis, pairs in enumerate(all_pairs))
        return bound, spect

    basis = field.basis
    bounds_out = []
    spect_out = []
    if field.dim == 1:
        tr = field.eval_nodes(basis.phi_faces)
        fams = [speed_quantities(tr[..., s].reshape((1,) + tr.shape[:-2] + (8,)),
                                 eos, 1, full=True) for s in (0, 1)]
        b, r = _controls_from_quantities(fams, 0)
        return (float(strict_exceed(b)),), (r,)
    mats = list(basis.phi_face_x) + list(basis.phi_face_y)
    for axis0 in (0, 1):
        fams = []
        for m in (mats[2 * axis0], mats[2 * axis0 + 1]):
            tr = np.moveaxis(field.eval_nodes(m), -1, 0)  # (Q, npx, npy, 8)
            fams.append(speed_quantities(tr, eos, axis0 + 1, full=True))
        b, r = _controls_from_quantities(fams, axis0)
        bounds_out.append(float(strict_exceed(b)))
        spect_out.append(r)
    return tuple(bounds_out), tuple(spect_out)


def _alpha_from_pairs(pairs, eos, axis, bound_kind):
    if bound_kind == BOUND_STANDARD:
        vals = [np.max(spectral_radius(u, eos, axis)) for pair in pairs
                for u in pair]
        return float(max(vals))
    best = 0.0
    for ua, ub in pairs:
        best = max(best, float(np.max(
            pair_bound(bound_kind, ua, ub, eos, axis, check=False))))
    return float(strict_exceed(best))


def _strict_1d_checks(field, eos, dt, alpha, floors):
    basis = field.basis
    b1_faces = field.eval_nodes(basis.phi_faces)[..., BX, :]
    b1 = field.coef[..., BX, 0]
    if not np.allclose(b1_faces, b1[..., None], rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(b1))))):
        raise PreconditionError("strict mode: B1 traces are not constant")
    nodes = field.eval_nodes(basis.phi_decomp)
    ok = is_admissible(np.moveaxis(nodes, -2, -1), floors)
    if not np.all(ok):
        raise PreconditionError("strict mode: node admissibility violated")
    lam = alpha * dt / field.geom.spacings[0]
    if lam > basis.tables.omega_hat_1 + 1e-14:
        raise PreconditionError(
            "strict mode: CFL exceeds the endpoint Lobatto weight")


def dg_euler_step_1d(field: DgField, eos, dt, alpha, strict=False,
                     floors=None) -> DgField:
    """Full modal forward-Euler DG update in 1D (all coefficients)."""
    if field.dim != 1:
        raise MhdDomainError("dg_euler_step_1d needs a 1D field")
    if strict:
        _strict_1d_checks(field, eos, dt, alpha,
                          floors or AdmissibilityTolerance())
    field.fill_ghosts()
    basis = field.basis
    g = field.geom.ghost
    n = field.geom.counts[0]
    dx = field.geom.spacings[0]

    faces = basis.phi_faces
    tr = field.eval_nodes(faces)  # (npad, 8, 2)
    _require_positive_nodes(field, tr, "face")
    ul, ur = tr[..., 0], tr[..., 1]
    fhat = lf_flux(ur[:-1], ul[1:], eos, 1, alpha)  # (npad-1, 8)

    if field.k > 0:
        raw = field.eval_nodes(basis.phi_gauss)  # (npad, 8, Q)
        _require_positive_nodes(field, raw, "volume")
        ug = np.moveaxis(raw, -1, -2)  # (npad, Q, 8)
        fg = physical_flux(ug, eos, 1)
        vol = np.swapaxes(fg, -1, -2) @ basis.wdphi_gauss
    else:
        vol = 0.0

    bnd = (fhat[1:, :, None] * faces[None, :, 1]
           - fhat[:-1, :, None] * faces[None, :, 0])  # (npad-2, 8, nc)
    vol_int = vol[g:g + n] if field.k > 0 else 0.0
    rhs = (vol_int - bnd[g - 1:g - 1 + n]) / (basis.mass * dx)
    new = field.interior_coef + dt * rhs
    _check_dg_blowup(new)
    return field.with_interior(new)


def dg_cell_update_1d(field: DgField, eos, dt, alpha, strict=False,
                      floors=None):
    """Cell averages after one forward-Euler step of the 1D scheme."""
    return dg_euler_step_1d(field, eos, dt, alpha, strict=strict,
                            floors=floors).cell_averages


def _strict_2d_checks(field, eos, dt, alpha1, alpha2, floors):
    basis = field.basis
    div = interface_divergence_field_2d(field)
    bmax = max(1.0, float(np.max(np.abs(field.coef[..., B_SLC, 0]))))
    if np.max(np.abs(div)) > 1e-12 * bmax:
        raise PreconditionError("strict mode: interface divergence nonzero")
    nodes = field.eval_nodes(basis.phi_decomp)
    if not np.all(is_admissible(np.moveaxis(nodes, -2, -1), floors)):
        raise PreconditionError("strict mode: node admissibility violated")
    lam = alpha1 * dt / field.geom.spacings[0] + alpha2 * dt / field.geom.spacings[1]
    if lam > basis.tables.omega_hat_1 + 1e-14:
        raise PreconditionError(
            "strict mode: CFL exceeds the endpoint Lobatto weight")


def dg_euler_step_2d(field: DgField, eos, dt, alpha1, alpha2, strict=False,
                     floors=None) -> DgField:
    """Full modal forward-Euler DG update in 2D."""
    from . import _kernels

    if field.dim != 2:
        raise MhdDomainError("dg_euler_step_2d needs a 2D field")
    if strict:
        _strict_2d_checks(field, eos, dt, alpha1, alpha2,
                          floors or AdmissibilityTolerance())
    field.fill_ghosts()
    basis = field.basis
    g = field.geom.ghost
    nx, ny = field.geom.counts
    dx, dy = field.geom.spacings

    if (_kernels.HAVE_NUMBA and isinstance(eos, IdealGasEos)
            and field.coef.size >= 8192 and np.ndim(alpha1) == 0
            and np.ndim(alpha2) == 0):
        new, bad = _kernels.fused_dg2d_euler(
            field.coef, basis, eos.gamma, dt, float(alpha1), float(alpha2),
            dx, dy, g)
        if bad is not None:
            raise NumericalBlowupError(
                f"non-positive density at flux nodes of cell {bad}", cell=bad)
        _check_dg_blowup(new)
        return field.with_interior(new)

    gw = basis.tables.gauss_w

    xm, xp = basis.phi_face_x
    ym, yp = basis.phi_face_y
    # traces: (npx, npy, 8, Q) -> pair along the axis for face fluxes
    trx_m = field.eval_nodes(xm)
    trx_p = field.eval_nodes(xp)
    try_m = field.eval_nodes(ym)
    try_p = field.eval_nodes(yp)
    for tr, what in ((trx_m, "west face"), (trx_p, "east face"),
                     (try_m, "south face"), (try_p, "north face")):
        _require_positive_nodes(field, tr, what)

    fx = lf_flux(np.moveaxis(trx_p[:-1], -1, -3), np.moveaxis(trx_m[1:], -1, -3),
                 eos, 1, alpha1)  # (npx-1, Q, npy, 8)? -> fix axes below
    # moveaxis placed the node axis before y; restore (faces_x, npy, Q, 8)
    fx = np.moveaxis(fx, -3, -2)
    fy = lf_flux(np.moveaxis(try_p[:, :-1], -1, -3),
                 np.moveaxis(try_m[:, 1:], -1, -3), eos, 2, alpha2)
    fy = np.moveaxis(fy, -3, -2)

    if field.k > 0:
        raw = field.eval_nodes(basis.phi_volume)
        _require_positive_nodes(field, raw, "volume")
        uvol = np.moveaxis(raw, -1, -2)
        f1 = physical_flux(uvol, eos, 1)
        f2 = physical_flux(uvol, eos, 2)
        wdxi, wdeta = basis.wdphi_volume
        vol = (np.tensordot(f1, wdxi, axes=(-2, 0)) / dx
               + np.tensordot(f2, wdeta, axes=(-2, 0)) / dy)
        vol = vol[g:g + nx, g:g + ny]
    else:
        vol = 0.0

    # Face integrals: sum_mu w_mu fhat(mu) phi_n(face node mu).
    wxm, wxp = basis.wphi_face_x
    wym, wyp = basis.wphi_face_y
    sxp = np.tensordot(fx[1:], wxp, axes=(-2, 0))
    sxm = np.tensordot(fx[:-1], wxm, axes=(-2, 0))
    syp = np.tensordot(fy[:, 1:], wyp, axes=(-2, 0))
    sym = np.tensordot(fy[:, :-1], wym, axes=(-2, 0))
    bnd = ((sxp - sxm)[g - 1:g - 1 + nx, g:g + ny] / dx
           + (syp - sym)[g:g + nx, g - 1:g - 1 + ny] / dy)
    rhs = (vol - bnd) / basis.mass
    new = field.interior_coef + dt * rhs
    _check_dg_blowup(new)
    return field.with_interior(new)


def dg_cell_update_2d(field: DgField, eos, dt, alpha1, alpha2, strict=False,
                      floors=None):
    """Cell averages after one forward-Euler step of the 2D scheme."""
    return dg_euler_step_2d(field, eos, dt, alpha1, alpha2, strict=strict,
                            floors=floors).cell_averages


def _check_dg_blowup(coef):
    bad = ~np.all(np.isfinite(coef), axis=(-2, -1))
    if np.any(bad):
        idx = tuple(int(v) for v in np.argwhere(bad)[0])
        raise NumericalBlowupError(
            f"non-finite DG coefficients at interior index {idx}", cell=idx)


def _require_positive_nodes(field, node_values, what):
    """Locate the first cell whose node density is non-positive."""
    rho = node_values[..., RHO, :]
    bad = ~np.all(rho > 0.0, axis=-1)
    if np.any(bad):
        g = field.geom.ghost
        idx = tuple(int(v) - g for v in np.argwhere(bad)[0])
        raise NumericalBlowupError(
            f"non-positive density at {what} nodes of cell {idx}", cell=idx)


# ----------------------------------------------------------------------
# Interface divergence (high-order DDF operator)
# ----------------------------------------------------------------------

def interface_divergence_field_2d(field: DgField):
    """Gauss-weighted differences of face-mean normal B per interior cell."""
    if field.dim != 2:
        raise MhdDomainError("interface divergence is a 2D operator")
    field.fill_ghosts()
    basis = field.basis
    g = field.geom.ghost
    nx, ny = field.geom.counts
    dx, dy = field.geom.spacings
    gw = basis.tables.gauss_w

    xm, xp = basis.phi_face_x
    ym, yp = basis.phi_face_y
    b1_m = field.eval_nodes(xm)[..., BX, :]  # (npx, npy, Q)
    b1_p = field.eval_nodes(xp)[..., BX, :]
    b2_m = field.eval_nodes(ym)[..., BY, :]
    b2_p = field.eval_nodes(yp)[..., BY, :]

    face_x = 0.5 * (b1_p[:-1] + b1_m[1:])  # mean across each x-face
    face_y = 0.5 * (b2_p[:, :-1] + b2_m[:, 1:])
    term_x = (face_x[1:] - face_x[:-1]) @ gw / dx
    term_y = np.einsum("ijq,q->ij", face_y[:, 1:] - face_y[:, :-1], gw) / dy
    return (term_x[g - 1:g - 1 + nx, g:g + ny]
            + term_y[g:g + nx, g - 1:g - 1 + ny])


def interface_divergence_2d(field: DgField, i, j):
    nx, ny = field.geom.counts
    if not (0 <= i < nx and 0 <= j < ny):
        raise MhdDomainError(f"cell index ({i}, {j}) outside the interior")
    return float(interface_divergence_field_2d(field)[i, j])


# ----------------------------------------------------------------------
# Time integration and the divergence-negativity diagnostic
# ----------------------------------------------------------------------

def ssp_rk3(euler, u0, dt, combine=None):
    """Three-stage third-order strong-stability-preserving Runge-Kutta.

    euler(u, dt) performs one forward-Euler application (including any
    limiting); combine(a, x, b, y) forms a x + b y and defaults to ndarray
    arithmetic.  Every stage output is a convex combination of Euler
    results, so stagewise admissibility is inherited.
    """
    if combine is None:
        def combine(a, x, b, y):
            return a * x + b * y
    u1 = euler(u0, dt)
    u2 = combine(0.75, u0, 0.25, euler(u1, dt))
    return combine(1.0 / 3.0, u0, 2.0 / 3.0, euler(u2, dt))


def combine_fields(a, x: DgField, b, y: DgField) -> DgField:
    """a x + b y, consuming y's storage (y is always the disposable fresh
    Euler output inside the SSP stages)."""
    y.coef *= b
    y.coef += a * x.coef
    y.fill_ghosts()
    return y


def energy_bound_diagnostic(avg_next, div_n, dt, hypotheses_hold=False):
    """(P, N, delta) splitting of the post-step internal energy.

    N = -dt (v.B) div is the divergence-driven part; P = ienergy + dt (v.B)
    div is the remainder, provably positive when the update hypotheses held
    at level n.  delta = N / P <= -1 exactly flags cells whose
    inadmissibility is explained by the divergence term.
    """
    u = np.asarray(avg_next, dtype=float)
    rho = u[..., RHO]
    if np.any(rho <= 0.0):
        raise MhdDomainError("diagnostic needs positive density")
    div_n = np.asarray(div_n, dtype=float)
    vdotb = np.sum(u[..., M_SLC] * u[..., B_SLC], axis=-1) / rho
    n_part = -dt * vdotb * div_n
    p_part = _ienergy_raw(u) - n_part
    if hypotheses_hold and np.any(p_part <= 0.0):
        raise InvariantViolationError(
            "positive part of the energy bound is not positive although the "
            "update hypotheses were declared satisfied")
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(p_part != 0.0, n_part / p_part, np.inf)
    return p_part, n_part, delta
