"""Physical and Lax-Friedrichs fluxes plus the split-average algebra.

The split averages (one per dimensionality) are the convex combinations of
U -+ F_i(U)/alpha terms whose admissibility underpins every
positivity-preserving scheme in this package.  They are only guaranteed
admissible when (a) the participating states satisfy the matching discrete
divergence-free (DDF) constraint on B and (b) the viscosity alpha strictly
exceeds the pairwise bound; both are enforced as preconditions here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bounds import alpha_sqrt, spectral_radius
from .exceptions import MhdDomainError, PreconditionError
from .states import (
    B_SLC,
    BX,
    BY,
    BZ,
    EN,
    IdealGasEos,
    MX,
    MY,
    MZ,
    RHO,
    _ienergy_raw,
    gstar_functional,
    is_admissible,
)

# Tolerance scale for "the DDF residual must vanish": roundoff-level slack
# relative to the magnetic field magnitude.
DDF_RTOL = 1e-12


def physical_flux(u, eos, axis):
    """Ideal-MHD flux along axis in {1,2,3}; shape-preserving on (..., 8).

    The B_axis slot is the identity v_i B_i - B_i v_i and comes out exactly
    zero in floating point.
    """
    if axis not in (1, 2, 3):
        raise MhdDomainError(f"axis must be 1, 2 or 3, got {axis}")
    u = np.asarray(u, dtype=float)
    rho = u[..., RHO]
    if np.any(rho <= 0.0):
        raise MhdDomainError("physical_flux requires rho > 0")
    if _kernels.HAVE_NUMBA and u.size >= 4096 and isinstance(eos, IdealGasEos):
        return _kernels.fused_physical_flux(u, eos.gamma, axis)
    inv_rho = 1.0 / rho
    en = _ienergy_raw(u)
    p = eos.pressure(rho, en * inv_rho)
    b2 = u[..., BX] ** 2 + u[..., BY] ** 2 + u[..., BZ] ** 2
    ptot = p + 0.5 * b2
    vi = u[..., axis] * inv_rho
    bi = u[..., BX - 1 + axis]
    vdotb = (u[..., MX] * u[..., BX] + u[..., MY] * u[..., BY]
             + u[..., MZ] * u[..., BZ]) * inv_rho

    f = np.empty_like(u)
    f[..., RHO] = rho * vi
    for c in range(3):
        v_c = u[..., MX + c] * inv_rho
        f[..., MX + c] = vi * u[..., MX + c] - bi * u[..., BX + c]
        # multiplication order keeps the B_axis slot exactly zero
        f[..., BX + c] = vi * u[..., BX + c] - bi * v_c
    f[..., axis] += ptot
    f[..., EN] = vi * (u[..., EN] + ptot) - bi * vdotb
    return f


def lf_flux(ul, ur, eos, axis, alpha):
    """Lax-Friedrichs numerical flux (F(ul) + F(ur) - alpha (ur - ul)) / 2."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0.0):
        raise MhdDomainError("LF viscosity alpha must be positive")
    ul = np.asarray(ul, dtype=float)
    ur = np.asarray(ur, dtype=float)
    if (_kernels.HAVE_NUMBA and alpha.ndim == 0 and ul.size >= 4096
            and isinstance(eos, IdealGasEos)
            and np.all(ul[..., RHO] > 0.0) and np.all(ur[..., RHO] > 0.0)):
        return _kernels.fused_lf_flux(ul, ur, eos.gamma, axis, float(alpha))
    fl = physical_flux(ul, eos, axis)
    fr = physical_flux(ur, eos, axis)
    return 0.5 * (fl + fr - alpha[..., None] * (ur - ul))


def _ddf_ok(residual, bscale):
    return np.abs(residual) <= DDF_RTOL * max(1.0, bscale)


def glf_average_1d(uhat, ucheck, eos, alpha, _bypass_checks=False):
    """(Uhat - F1(Uhat)/alpha + Ucheck + F1(Ucheck)/alpha) / 2.

    Preconditions (skipped only by the counterexample harness via the
    private flag): both states admissible, equal B1, and alpha strictly
    above the sqrt-weighted pair bound along axis 1.
    """
    uhat = np.asarray(uhat, dtype=float)
    ucheck = np.asarray(ucheck, dtype=float)
    if not _bypass_checks:
        if not (np.all(is_admissible(uhat)) and np.all(is_admissible(ucheck))):
            raise PreconditionError("split average needs admissible inputs")
        db1 = uhat[..., BX] - ucheck[..., BX]
        bscale = float(np.max(np.abs(np.concatenate(
            [uhat[..., B_SLC].ravel(), ucheck[..., B_SLC].ravel()]))))
        if not np.all(_ddf_ok(db1, bscale)):
            raise PreconditionError("1D DDF condition B1_hat = B1_check violated")
        bound = alpha_sqrt(uhat, ucheck, eos, 1, check=False)
        if not np.all(np.asarray(alpha) > bound):
            raise PreconditionError(
                "alpha must strictly exceed the pairwise viscosity bound")
    alpha = np.asarray(alpha, dtype=float)[..., None]
    fh = physical_flux(uhat, eos, 1)
    fc = physical_flux(ucheck, eos, 1)
    return 0.5 * (uhat - fh / alpha + ucheck + fc / alpha)


@dataclass(frozen=True)
class WeightedQuadrupleSet2D:
    """Weighted admissible state quadruples entering the 2D split average.

    Arrays have shape (Q, 8); omega has shape (Q,), is positive and sums to
    one.  (u_bar, u_tilde) pair along x, (u_hat, u_check) along y.
    """

    u_bar: np.ndarray
    u_tilde: np.ndarray
    u_hat: np.ndarray
    u_check: np.ndarray
    omega: np.ndarray
    dx: float
    dy: float

    def __post_init__(self):
        for name in ("u_bar", "u_tilde", "u_hat", "u_check"):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, arr)
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        object.__setattr__(self, "omega", omega)
        if not (self.dx > 0 and self.dy > 0):
            raise MhdDomainError("spacings must be positive")
        if np.any(omega <= 0) or abs(omega.sum() - 1.0) > 1e-14:
            raise MhdDomainError("weights must be positive and sum to one")
        for name in ("u_bar", "u_tilde", "u_hat", "u_check"):
            if not np.all(is_admissible(getattr(self, name))):
                raise MhdDomainError(f"{name} contains inadmissible states")

    def ddf_residual(self):
        rx = np.sum(self.omega * (self.u_bar[:, BX] - self.u_tilde[:, BX])) / self.dx
        ry = np.sum(self.omega * (self.u_hat[:, BX + 1] - self.u_check[:, BX + 1])) / self.dy
        return rx + ry

    def bscale(self):
        return float(max(np.max(np.abs(f[:, B_SLC])) for f in
                         (self.u_bar, self.u_tilde, self.u_hat, self.u_check)))


@dataclass(frozen=True)
class WeightedSextupleSet3D:
    """3D analogue with an additional (u_acute, u_grave) pair along z."""

    u_bar: np.ndarray
    u_tilde: np.ndarray
    u_hat: np.ndarray
    u_check: np.ndarray
    u_acute: np.ndarray
    u_grave: np.ndarray
    omega: np.ndarray
    dx: float
    dy: float
    dz: float

    _FAMS = ("u_bar", "u_tilde", "u_hat", "u_check", "u_acute", "u_grave")

    def __post_init__(self):
        for name in self._FAMS:
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, arr)
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        object.__setattr__(self, "omega", omega)
        if not (self.dx > 0 and self.dy > 0 and self.dz > 0):
            raise MhdDomainError("spacings must be positive")
        if np.any(omega <= 0) or abs(omega.sum() - 1.0) > 1e-14:
            raise MhdDomainError("weights must be positive and sum to one")
        for name in self._FAMS:
            if not np.all(is_admissible(getattr(self, name))):
                raise MhdDomainError(f"{name} contains inadmissible states")

    def ddf_residual(self):
        rx = np.sum(self.omega * (self.u_bar[:, BX] - self.u_tilde[:, BX])) / self.dx
        ry = np.sum(self.omega * (self.u_hat[:, BX + 1] - self.u_check[:, BX + 1])) / self.dy
        rz = np.sum(self.omega * (self.u_acute[:, BX + 2] - self.u_grave[:, BX + 2])) / self.dz
        return rx + ry + rz

    def bscale(self):
        return float(max(np.max(np.abs(getattr(self, f)[:, B_SLC]))
                         for f in self._FAMS))


def _split_pair_term(u_minus, u_plus, eos, axis, alpha):
    """u_minus - F(u_minus)/alpha + u_plus + F(u_plus)/alpha, summed over Q."""
    fm = physical_flux(u_minus, eos, axis)
    fp = physical_flux(u_plus, eos, axis)
    return (u_minus - fm / alpha) + (u_plus + fp / alpha)


def glf_average_2d(qset: WeightedQuadrupleSet2D, eos, alpha1, alpha2,
                   _bypass_checks=False):
    """Weighted 2D split average; admissible under the 2D DDF condition."""
    if not _bypass_checks:
        res = qset.ddf_residual()
        if not _ddf_ok(res, qset.bscale()):
            raise PreconditionError(
                f"2D DDF residual {res:.3e} above tolerance")
        b1 = np.max(alpha_sqrt(qset.u_bar, qset.u_tilde, eos, 1, check=False))
        b2 = np.max(alpha_sqrt(qset.u_hat, qset.u_check, eos, 2, check=False))
        if not (alpha1 > b1 and alpha2 > b2):
            raise PreconditionError(
                "alphas must strictly exceed the per-pair viscosity bounds")
    cx = alpha1 / qset.dx
    cy = alpha2 / qset.dy
    tx = _split_pair_term(qset.u_bar, qset.u_tilde, eos, 1, alpha1)
    ty = _split_pair_term(qset.u_hat, qset.u_check, eos, 2, alpha2)
    acc = np.sum(qset.omega[:, None] * (cx * tx + cy * ty), axis=0)
    return acc / (2.0 * (cx + cy))


def glf_average_3d(sset: WeightedSextupleSet3D, eos, alpha1, alpha2, alpha3,
                   _bypass_checks=False):
    """Weighted 3D split average; admissible under the 3D DDF condition."""
    if not _bypass_checks:
        res = sset.ddf_residual()
        if not _ddf_ok(res, sset.bscale()):
            raise PreconditionError(
                f"3D DDF residual {res:.3e} above tolerance")
        b1 = np.max(alpha_sqrt(sset.u_bar, sset.u_tilde, eos, 1, check=False))
        b2 = np.max(alpha_sqrt(sset.u_hat, sset.u_check, eos, 2, check=False))
        b3 = np.max(alpha_sqrt(sset.u_acute, sset.u_grave, eos, 3, check=False))
        if not (alpha1 > b1 and alpha2 > b2 and alpha3 > b3):
            raise PreconditionError(
                "alphas must strictly exceed the per-pair viscosity bounds")
    cx = alpha1 / sset.dx
    cy = alpha2 / sset.dy
    cz = alpha3 / sset.dz
    tx = _split_pair_term(sset.u_bar, sset.u_tilde, eos, 1, alpha1)
    ty = _split_pair_term(sset.u_hat, sset.u_check, eos, 2, alpha2)
    tz = _split_pair_term(sset.u_acute, sset.u_grave, eos, 3, alpha3)
    acc = np.sum(sset.omega[:, None] * (cx * tx + cy * ty + cz * tz), axis=0)
    return acc / (2.0 * (cx + cy + cz))


def splitting_inequality_lhs(u, ut, eos, axis, alpha, v_star, b_star):
    """Two-state inequality left-hand side:

    (U - F_i(U)/alpha + Ut + F_i(Ut)/alpha) . n* + |B*|^2
      + (B_i - Bt_i)(v* . B*)/alpha

    Positive for all (v*, B*) whenever |alpha| exceeds the pairwise bound.
    """
    u = np.asarray(u, dtype=float)
    ut = np.asarray(ut, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    b_star = np.asarray(b_star, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    f = physical_flux(u, eos, axis)
    ft = physical_flux(ut, eos, axis)
    combo = (u - f / alpha[..., None]) + (ut + ft / alpha[..., None])
    # gstar adds |B*|^2/2 once; the two-state functional carries |B*|^2.
    base = gstar_functional(combo, v_star, b_star) + 0.5 * np.sum(b_star ** 2, axis=-1)
    coupling = (u[..., BX + axis - 1] - ut[..., BX + axis - 1]) / alpha
    return base + coupling * np.sum(v_star * b_star, axis=-1)


def onestate_inequality_lhs(u, eos, axis, alpha, v_star, b_star):
    """One-state inequality left-hand side:

    (U + F_i(U)/alpha) . n* + |B*|^2/2
      + (v_i* |B*|^2/2 - B_i (v* . B*)) / alpha
    """
    u = np.asarray(u, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    b_star = np.asarray(b_star, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    f = physical_flux(u, eos, axis)
    base = gstar_functional(u + f / alpha[..., None], v_star, b_star)
    b2 = np.sum(b_star * b_star, axis=-1)
    extra = (v_star[..., axis - 1] * 0.5 * b2
             - u[..., BX + axis - 1] * np.sum(v_star * b_star, axis=-1)) / alpha
    return base + extra


@dataclass(frozen=True)
class SplittingCounterexampleReport:
    """Outcome of the plain LF-splitting probe at one (chi, p)."""

    state: np.ndarray
    alpha: float
    ienergy_plus: float
    ienergy_minus: float
    closed_form: float
    zero_pressure_limit: float
    violates: bool


def lf_splitting_counterexample(eos, chi, p):
    """Evaluate U +- F1(U)/alpha for the static low-pressure probe state.

    U = (1, 0, 0, 0, 1, 0, 0, p/(gamma-1) + 1/2) with alpha = chi * spectral
    radius.  The resulting internal energy equals
    p/(gamma-1) - (p - 1/2)^2 / (2 chi^2), which is negative for small p:
    the plain splitting property fails no matter the viscosity multiplier.
    """
    gamma = eos.gamma
    if chi < 1.0:
        raise MhdDomainError("viscosity multiplier chi must be >= 1")
    if not 0.0 < p < 1.0 / gamma:
        raise MhdDomainError(f"p must lie in (0, 1/gamma) = (0, {1.0 / gamma})")
    u = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, p / (gamma - 1.0) + 0.5])
    alpha = chi * float(spectral_radius(u, eos, 1))
    f = physical_flux(u, eos, 1)
    e_plus = float(_ienergy_raw(u + f / alpha))
    e_minus = float(_ienergy_raw(u - f / alpha))
    closed = p / (gamma - 1.0) - (p - 0.5) ** 2 / (2.0 * chi ** 2)
    return SplittingCounterexampleReport(
        state=u,
        alpha=alpha,
        ienergy_plus=e_plus,
        ienergy_minus=e_minus,
        closed_form=closed,
        zero_pressure_limit=-1.0 / (8.0 * chi ** 2),
        violates=min(e_plus, e_minus) <= 0.0,
    )
