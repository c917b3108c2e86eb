"""Conserved/primitive state algebra for ideal compressible MHD.

States are 8-vectors (rho, m1, m2, m3, B1, B2, B3, E) stored with the
component axis last, so every kernel here works on a single state of shape
(8,) and on whole fields of shape (..., 8) alike.  A state is admissible
when both the density and the internal energy

    ienergy(U) = E - (|m|^2 / rho + |B|^2) / 2

are strictly positive; "strictly" is realized as "> eps" with small
configurable absolute floors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .exceptions import MhdDomainError

# Slot indices of the 8-component conserved vector.
RHO, MX, MY, MZ, BX, BY, BZ, EN = range(8)
M_SLC = slice(MX, MZ + 1)
B_SLC = slice(BX, BZ + 1)

# Primitive layout: (rho, v1, v2, v3, p, B1, B2, B3).
P_RHO, P_VX, P_VY, P_VZ, P_P = 0, 1, 2, 3, 4
V_SLC = slice(P_VX, P_VZ + 1)
PB_SLC = slice(5, 8)


@dataclass(frozen=True)
class AdmissibilityTolerance:
    """Absolute positivity floors for density and internal energy."""

    eps_rho: float = 1e-13
    eps_e: float = 1e-13

    def __post_init__(self):
        if not (self.eps_rho > 0 and self.eps_e > 0):
            raise MhdDomainError("positivity floors must be strictly positive")


DEFAULT_TOL = AdmissibilityTolerance()


@runtime_checkable
class PressureLaw(Protocol):
    """General equation of state p = p(rho, e).

    Implementations must declare that for rho > 0 pressure and specific
    internal energy are positive together (``positivity_equivalent``); every
    admissibility result in this package relies on that equivalence.
    """

    positivity_equivalent: bool

    def pressure(self, rho, e): ...

    def specific_energy(self, rho, p): ...


@dataclass(frozen=True)
class IdealGasEos:
    """Gamma-law gas, p = (gamma - 1) rho e."""

    gamma: float = 1.4
    positivity_equivalent: bool = field(default=True, init=False)

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise MhdDomainError(f"adiabatic index must exceed 1, got {self.gamma}")

    def pressure(self, rho, e):
        return (self.gamma - 1.0) * rho * e

    def specific_energy(self, rho, p):
        return p / ((self.gamma - 1.0) * rho)

    def rho_e_from_pressure(self, p):
        """Volumetric internal energy rho*e for a given pressure."""
        return p / (self.gamma - 1.0)


@dataclass(frozen=True)
class GeneralEos:
    """Wraps a user pressure law handle; the provider vouches for positivity."""

    pressure_fn: Callable
    specific_energy_fn: Callable
    positivity_equivalent: bool = True

    def pressure(self, rho, e):
        return self.pressure_fn(rho, e)

    def specific_energy(self, rho, p):
        return self.specific_energy_fn(rho, p)


def eos_pressure(eos, rho, e):
    """Pressure from density and specific internal energy.

    Raises on non-positive density; e may be any real (zero internal energy
    is a legal boundary case and must map to zero pressure for gamma law).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise MhdDomainError("pressure law requires rho > 0")
    return eos.pressure(rho, np.asarray(e, dtype=float))


def _ienergy_raw(u):
    """Internal energy without domain checks (used by admissibility tests)."""
    u = np.asarray(u, dtype=float)
    kin = u[..., MX] * u[..., MX]
    kin += u[..., MY] * u[..., MY]
    kin += u[..., MZ] * u[..., MZ]
    kin /= u[..., RHO]
    mag = u[..., BX] * u[..., BX]
    mag += u[..., BY] * u[..., BY]
    mag += u[..., BZ] * u[..., BZ]
    return u[..., EN] - 0.5 * kin - 0.5 * mag


def internal_energy(u):
    """rho*e of a conserved state; requires rho > 0."""
    u = np.asarray(u, dtype=float)
    if np.any(u[..., RHO] <= 0.0):
        raise MhdDomainError("internal_energy requires rho > 0")
    return _ienergy_raw(u)


def is_admissible(u, tol: AdmissibilityTolerance = DEFAULT_TOL):
    """True where rho > eps_rho and ienergy > eps_e; NaN/inf map to False."""
    u = np.asarray(u, dtype=float)
    finite = np.all(np.isfinite(u), axis=-1)
    rho = u[..., RHO]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        en = _ienergy_raw(u)
    ok = finite & (rho > tol.eps_rho) & (en > tol.eps_e)
    # NaN comparisons are already False, but make it explicit.
    return np.where(np.isnan(en) | np.isnan(rho), False, ok)


def admissibility_report(u, tol: AdmissibilityTolerance = DEFAULT_TOL):
    """Diagnostic per-check breakdown for a state (or field of states)."""
    u = np.asarray(u, dtype=float)
    finite = np.all(np.isfinite(u), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        en = _ienergy_raw(u)
    return {
        "finite": finite,
        "rho_ok": u[..., RHO] > tol.eps_rho,
        "energy_ok": np.where(np.isnan(en), False, en > tol.eps_e),
    }


def gstar_functional(u, v_star, b_star):
    """Linear-in-U functional U . n* + |B*|^2 / 2.

    Here n* = (|v*|^2/2, -v*, -B*, 1); the functional is nonnegative on the
    admissible set for every auxiliary pair (v*, B*) and equals the internal
    energy at the minimizing choice v* = m/rho, B* = B.
    """
    u = np.asarray(u, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    b_star = np.asarray(b_star, dtype=float)
    dot = (
        0.5 * u[..., RHO] * np.sum(v_star * v_star, axis=-1)
        - np.sum(u[..., M_SLC] * v_star, axis=-1)
        - np.sum(u[..., B_SLC] * b_star, axis=-1)
        + u[..., EN]
    )
    return dot + 0.5 * np.sum(b_star * b_star, axis=-1)


def orthogonal_transform(u, t3):
    """Apply diag{1, T3, T3, 1} to a state; T3 must be orthogonal (3x3)."""
    t3 = np.asarray(t3, dtype=float)
    if t3.shape != (3, 3):
        raise MhdDomainError("T3 must be a 3x3 matrix")
    if not np.allclose(t3.T @ t3, np.eye(3), atol=1e-12, rtol=0.0):
        raise MhdDomainError("T3 is not orthogonal within 1e-12")
    u = np.asarray(u, dtype=float)
    out = u.copy()
    out[..., M_SLC] = u[..., M_SLC] @ t3.T
    out[..., B_SLC] = u[..., B_SLC] @ t3.T
    return out


def to_primitive(u, eos):
    """Conserved -> primitive (rho, v, p, B); requires rho > 0."""
    u = np.asarray(u, dtype=float)
    rho = u[..., RHO]
    if np.any(rho <= 0.0):
        raise MhdDomainError("to_primitive requires rho > 0")
    w = np.empty_like(u)
    w[..., P_RHO] = rho
    w[..., V_SLC] = u[..., M_SLC] / rho[..., None]
    e = _ienergy_raw(u) / rho
    w[..., P_P] = eos.pressure(rho, e)
    w[..., PB_SLC] = u[..., B_SLC]
    return w


def to_conserved(w, eos):
    """Primitive -> conserved; requires rho > 0."""
    w = np.asarray(w, dtype=float)
    rho = w[..., P_RHO]
    if np.any(rho <= 0.0):
        raise MhdDomainError("to_conserved requires rho > 0")
    u = np.empty_like(w)
    u[..., RHO] = rho
    u[..., M_SLC] = rho[..., None] * w[..., V_SLC]
    u[..., B_SLC] = w[..., PB_SLC]
    rho_e = rho * eos.specific_energy(rho, w[..., P_P])
    kin = 0.5 * rho * np.sum(w[..., V_SLC] ** 2, axis=-1)
    mag = 0.5 * np.sum(w[..., PB_SLC] ** 2, axis=-1)
    u[..., EN] = rho_e + kin + mag
    return u


def _require_finite(vec, what):
    if not np.all(np.isfinite(vec)):
        raise MhdDomainError(f"{what} has non-finite components")


@dataclass(frozen=True)
class ConservedState:
    """A single conserved 8-vector with derived accessors.

    Immutable; all methods are pure so values are freely shareable.
    """

    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=float).reshape(8).copy()
        vec.setflags(write=False)
        object.__setattr__(self, "vec", vec)
        _require_finite(vec, "ConservedState")

    @classmethod
    def from_components(cls, rho, m, b, energy):
        return cls(np.concatenate(([rho], np.asarray(m, float),
                                   np.asarray(b, float), [energy])))

    @property
    def rho(self):
        return float(self.vec[RHO])

    @property
    def m(self):
        return self.vec[M_SLC]

    @property
    def b(self):
        return self.vec[B_SLC]

    @property
    def energy(self):
        return float(self.vec[EN])

    @property
    def velocity(self):
        if self.rho <= 0.0:
            raise MhdDomainError("velocity requires rho > 0")
        return self.m / self.rho

    def internal_energy(self):
        return float(internal_energy(self.vec))

    def pressure(self, eos):
        return float(eos.pressure(self.rho, self.internal_energy() / self.rho))

    def total_pressure(self, eos):
        return self.pressure(eos) + 0.5 * float(np.sum(self.b ** 2))

    def plasma_beta(self, eos):
        b2 = float(np.sum(self.b ** 2))
        if b2 == 0.0:
            return np.inf
        return 2.0 * self.pressure(eos) / b2

    def is_admissible(self, tol: AdmissibilityTolerance = DEFAULT_TOL):
        return bool(is_admissible(self.vec, tol))

    def to_primitive(self, eos) -> "PrimitiveState":
        return PrimitiveState(to_primitive(self.vec, eos))


@dataclass(frozen=True)
class PrimitiveState:
    """A single primitive 8-vector (rho, v, p, B)."""

    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=float).reshape(8).copy()
        vec.setflags(write=False)
        object.__setattr__(self, "vec", vec)
        _require_finite(vec, "PrimitiveState")

    @classmethod
    def from_components(cls, rho, v, p, b):
        return cls(np.concatenate(([rho], np.asarray(v, float), [p],
                                   np.asarray(b, float))))

    @property
    def rho(self):
        return float(self.vec[P_RHO])

    @property
    def v(self):
        return self.vec[V_SLC]

    @property
    def p(self):
        return float(self.vec[P_P])

    @property
    def b(self):
        return self.vec[PB_SLC]

    def to_conserved(self, eos) -> ConservedState:
        return ConservedState(to_conserved(self.vec, eos))
