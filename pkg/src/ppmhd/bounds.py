"""Wave speeds and numerical-viscosity lower bounds.

Two sound-speed scales appear throughout.  The acoustic speed
c_full = sqrt(gamma p / rho) feeds the fast magnetosonic speed and the
spectral radius used by standard Lax-Friedrichs viscosity.  The reduced
scale c_red = p / (rho sqrt(2 e)) feeds the reduced fast speed entering the
pairwise viscosity bounds that make the split fluxes provably admissible.
For a gamma-law gas c_red = sqrt((gamma-1) p / (2 rho)) < c_full.

All bound evaluators accept both single states (shape (8,)) and stacked
fields (shape (..., 8)).
"""

from __future__ import annotations

import numpy as np

from .exceptions import MhdDomainError
from .states import (
    B_SLC,
    DEFAULT_TOL,
    IdealGasEos,
    M_SLC,
    RHO,
    is_admissible,
    _ienergy_raw,
)

# Enumeration of the selectable flux-viscosity bounds.
BOUND_STANDARD = "standard"
BOUND_ALPHA_RHO = "alpha-rho"
BOUND_ALPHA_SQRT = "alpha-sqrt"
BOUND_ALPHA_TILDE = "alpha-tilde"
BOUND_KINDS = (BOUND_STANDARD, BOUND_ALPHA_RHO, BOUND_ALPHA_SQRT, BOUND_ALPHA_TILDE)

ALPHA_TILDE_VARIANTS = ("reduced", "ideal", "simplified")

# Realization of "alpha strictly greater than the bound" in floating point.
_EXCEED_REL = 1e-12
_EXCEED_ABS = 1e-300


def strict_exceed(bound):
    """Smallest practical value strictly above a nonnegative bound."""
    return np.asarray(bound, dtype=float) * (1.0 + _EXCEED_REL) + _EXCEED_ABS


def _split(u, eos, need_full=False):
    """(rho, v, B, e, p) from conserved data; e is specific internal energy."""
    u = np.asarray(u, dtype=float)
    rho = u[..., RHO]
    v = u[..., M_SLC] / rho[..., None]
    b = u[..., B_SLC]
    e = _ienergy_raw(u) / rho
    p = eos.pressure(rho, e)
    if need_full and not isinstance(eos, IdealGasEos):
        raise MhdDomainError("acoustic/fast full speeds need a gamma-law EOS")
    return rho, v, b, e, p


def reduced_sound_speed(rho, p, e):
    """p / (rho sqrt(2 e)); vanishes with p (zero-pressure boundary case)."""
    rho = np.asarray(rho, dtype=float)
    p = np.asarray(p, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(rho <= 0.0):
        raise MhdDomainError("sound speeds require rho > 0")
    if np.any(e < 0.0):
        raise MhdDomainError("sound speeds require e >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(e > 0.0, p / (rho * np.sqrt(2.0 * e)), 0.0)


def sound_speeds(w, eos):
    """(acoustic speed, reduced speed) of a primitive state.

    The acoustic speed sqrt(gamma p / rho) is gamma-law specific; the reduced
    speed is EOS-generic and strictly smaller for any gamma law with p > 0.
    """
    w = np.asarray(w.vec if hasattr(w, "vec") else w, dtype=float)
    rho, p = w[..., 0], w[..., 4]
    if np.any(rho <= 0.0):
        raise MhdDomainError("sound speeds require rho > 0")
    e = eos.specific_energy(rho, p)
    if np.any(e < 0.0):
        raise MhdDomainError("sound speeds require e >= 0")
    if not isinstance(eos, IdealGasEos):
        raise MhdDomainError("the acoustic speed needs a gamma-law EOS")
    full = np.sqrt(eos.gamma * p / rho)
    return full, reduced_sound_speed(rho, p, e)


def _fast_from_cs2(cs2, rho, b, axis):
    """Fast magnetosonic speed along `axis` (1-based) given a squared sound
    scale; the same closed form serves the acoustic and reduced variants."""
    b = np.asarray(b, dtype=float)
    b2 = np.sum(b * b, axis=-1) / rho
    bi2 = b[..., axis - 1] ** 2 / rho
    s = cs2 + b2
    disc = s * s - 4.0 * cs2 * bi2
    disc = np.maximum(disc, 0.0)  # guard tiny negative from roundoff
    return np.sqrt(0.5 * (s + np.sqrt(disc)))


def fast_speed(u, eos, axis, reduced=False):
    """Fast magnetosonic speed of a conserved state along axis in {1,2,3}.

    reduced=True swaps the acoustic scale for the reduced one.  Degenerates
    to the corresponding sound speed at B = 0.
    """
    if axis not in (1, 2, 3):
        raise MhdDomainError(f"axis must be 1, 2 or 3, got {axis}")
    rho, _, b, e, p = _split(u, eos, need_full=not reduced)
    if np.any(rho <= 0.0):
        raise MhdDomainError("fast_speed requires rho > 0")
    if reduced:
        cs = reduced_sound_speed(rho, p, np.maximum(e, 0.0))
        cs2 = cs * cs
    else:
        cs2 = eos.gamma * p / rho
    return _fast_from_cs2(cs2, rho, b, axis)


def spectral_radius(u, eos, axis):
    """|v_i| + fast speed: the Jacobian spectral radius along the axis."""
    rho, v, b, _, p = _split(u, eos, need_full=True)
    if np.any(rho <= 0.0):
        raise MhdDomainError("spectral_radius requires rho > 0")
    cs2 = eos.gamma * p / rho
    return np.abs(v[..., axis - 1]) + _fast_from_cs2(cs2, rho, b, axis)


def _reduced_fast_and_v(u, eos, axis):
    rho, v, b, e, p = _split(u, eos)
    cs = reduced_sound_speed(rho, p, np.maximum(e, 0.0))
    return rho, v[..., axis - 1], b, _fast_from_cs2(cs * cs, rho, b, axis)


class SpeedData:
    """Per-state quantities the pairwise bounds combine; computing them
    once per trace family halves the work of adjacent-pair maxima."""

    __slots__ = ("rho", "sroot", "vi", "cred", "cfull", "b")

    def __init__(self, rho, sroot, vi, cred, cfull, b):
        self.rho = rho
        self.sroot = sroot
        self.vi = vi
        self.cred = cred
        self.cfull = cfull
        self.b = b

    def sliced(self, idx):
        return SpeedData(self.rho[idx], self.sroot[idx], self.vi[idx],
                         self.cred[idx],
                         None if self.cfull is None else self.cfull[idx],
                         self.b[idx])


def speed_quantities(u, eos, axis, full=False):
    """SpeedData of a state array along a 1-based axis."""
    rho, v, b, e, p = _split(u, eos, need_full=full)
    cs = reduced_sound_speed(rho, p, np.maximum(e, 0.0))
    cred = _fast_from_cs2(cs * cs, rho, b, axis)
    cfull = None
    if full:
        cfull = _fast_from_cs2(eos.gamma * p / rho, rho, b, axis)
    return SpeedData(rho=rho, sroot=np.sqrt(rho), vi=v[..., axis - 1],
                     cred=cred, cfull=cfull, b=b)


def alpha_sqrt_pair(qa: SpeedData, qb: SpeedData):
    """sqrt-weighted pairwise bound from precomputed SpeedData."""
    denom = qa.sroot + qb.sroot
    mixed = np.abs(qa.sroot * qa.vi + qb.sroot * qb.vi) / denom \
        + np.maximum(qa.cred, qb.cred)
    head = np.maximum(np.maximum(np.abs(qa.vi) + qa.cred,
                                 np.abs(qb.vi) + qb.cred), mixed)
    db = qa.b - qb.b
    dbn = np.sqrt(db[..., 0] ** 2 + db[..., 1] ** 2 + db[..., 2] ** 2)
    return head + dbn / denom


def _check_pair_admissible(u, ut, check):
    if check and not (np.all(is_admissible(u, DEFAULT_TOL)) and
                      np.all(is_admissible(ut, DEFAULT_TOL))):
        raise MhdDomainError("viscosity bounds require admissible states")


def alpha_sigma(u, ut, eos, axis, sigma, check=True):
    """Pairwise viscosity bound with an explicit mixing weight sigma.

    max{|v_i| + c_i, |vt_i| + ct_i, |sigma v_i + (1-sigma) vt_i| + max(c_i, ct_i)}
      + |Bt - B|/sqrt(2) * sqrt(sigma^2/rho + (1-sigma)^2/rho_t)
    with the reduced fast speeds c.  Any real sigma is legal.
    """
    _check_pair_admissible(u, ut, check)
    rho, vi, b, c = _reduced_fast_and_v(u, eos, axis)
    rho_t, vti, bt, ct = _reduced_fast_and_v(ut, eos, axis)
    sigma = np.asarray(sigma, dtype=float)
    mixed = np.abs(sigma * vi + (1.0 - sigma) * vti) + np.maximum(c, ct)
    head = np.maximum(np.maximum(np.abs(vi) + c, np.abs(vti) + ct), mixed)
    db = np.sqrt(np.sum((bt - b) ** 2, axis=-1))
    f = db / np.sqrt(2.0) * np.sqrt(sigma ** 2 / rho + (1.0 - sigma) ** 2 / rho_t)
    return head + f


def alpha_rho(u, ut, eos, axis, check=True):
    """Closed form of alpha_sigma at sigma = rho / (rho + rho_t)."""
    _check_pair_admissible(u, ut, check)
    rho, vi, b, c = _reduced_fast_and_v(u, eos, axis)
    rho_t, vti, bt, ct = _reduced_fast_and_v(ut, eos, axis)
    mixed = np.abs(rho * vi + rho_t * vti) / (rho + rho_t) + np.maximum(c, ct)
    head = np.maximum(np.maximum(np.abs(vi) + c, np.abs(vti) + ct), mixed)
    db = np.sqrt(np.sum((bt - b) ** 2, axis=-1))
    return head + db / np.sqrt(2.0 * (rho + rho_t))


def alpha_sqrt(u, ut, eos, axis, check=True):
    """Closed form of alpha_sigma at sigma = sqrt(rho)/(sqrt(rho)+sqrt(rho_t)).

    The default pair bound everywhere a flux viscosity is needed.
    """
    _check_pair_admissible(u, ut, check)
    return alpha_sqrt_pair(speed_quantities(u, eos, axis),
                           speed_quantities(ut, eos, axis))


def alpha_hat(u, eos, axis, v_star_i, check=True):
    """One-state bound max{|v_i|, |v_i*|} + reduced fast speed."""
    if check and not np.all(is_admissible(u, DEFAULT_TOL)):
        raise MhdDomainError("alpha_hat requires an admissible state")
    _, vi, _, c = _reduced_fast_and_v(u, eos, axis)
    return np.maximum(np.abs(vi), np.abs(np.asarray(v_star_i, dtype=float))) + c


def _h_speed(u, eos, axis, ideal):
    """|v_i| + |p_tot - B_i^2| / (rho * fast_speed_i) for one state."""
    rho, v, b, e, p = _split(u, eos, need_full=ideal)
    if ideal:
        cs2 = eos.gamma * p / rho
    else:
        cs = reduced_sound_speed(rho, p, np.maximum(e, 0.0))
        cs2 = cs * cs
    ci = _fast_from_cs2(cs2, rho, b, axis)
    ptot = p + 0.5 * np.sum(b * b, axis=-1)
    num = np.abs(ptot - b[..., axis - 1] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num > 0.0, num / (rho * ci), 0.0)
    return np.abs(v[..., axis - 1]) + ratio, ci, v[..., axis - 1]


def alpha_tilde(uhat, ucheck, eos, axis=1, variant="reduced", check=True):
    """Alternative pairwise bound built from one-state inequalities.

    variant:
      "reduced"    - base form with reduced fast speeds,
      "ideal"      - same structure with acoustic fast speeds (gamma law only),
      "simplified" - larger closed form using per-state |v_i| + |p_tot - B_i^2|
                     / (rho c_i) in place of the coupled denominators.
    If a coupled denominator degenerates (A -+ v below 1e-12) the simplified
    form is used instead; it stays finite and still bounds from above.
    """
    if variant not in ALPHA_TILDE_VARIANTS:
        raise MhdDomainError(f"unknown alpha_tilde variant {variant!r}")
    _check_pair_admissible(uhat, ucheck, check)
    ideal = variant == "ideal"

    h_hat, c_hat, v_hat = _h_speed(uhat, eos, axis, ideal)
    h_chk, c_chk, v_chk = _h_speed(ucheck, eos, axis, ideal)
    cmax = np.maximum(c_hat, c_chk)
    simplified = cmax + np.maximum(h_hat, h_chk)
    if variant == "simplified":
        return simplified

    a = np.maximum(np.abs(v_hat), np.abs(v_chk)) + cmax
    den_hat = a - v_hat
    den_chk = a + v_chk
    degen = (den_hat < 1e-12) | (den_chk < 1e-12)

    rho_h, _, b_h, _, p_h = _split(uhat, eos)
    rho_c, _, b_c, _, p_c = _split(ucheck, eos)
    ptot_h = p_h + 0.5 * np.sum(b_h * b_h, axis=-1)
    ptot_c = p_c + 0.5 * np.sum(b_c * b_c, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_hat = np.abs(ptot_h - b_h[..., axis - 1] ** 2) / (rho_h * den_hat)
        d_chk = np.abs(ptot_c - b_c[..., axis - 1] ** 2) / (rho_c * den_chk)
    base = cmax + np.maximum(np.abs(v_hat) + d_hat, np.abs(v_chk) + d_chk)

    out = np.where(degen, simplified, base)
    if out.ndim == 0:
        return float(out)
    return out


def pair_bound(kind, u, ut, eos, axis, check=True):
    """Dispatch a pairwise bound by kind; "standard" maps to the larger of
    the two spectral radii (the classical local LF viscosity)."""
    if kind == BOUND_STANDARD:
        return np.maximum(spectral_radius(u, eos, axis),
                          spectral_radius(ut, eos, axis))
    if kind == BOUND_ALPHA_RHO:
        return alpha_rho(u, ut, eos, axis, check=check)
    if kind == BOUND_ALPHA_SQRT:
        return alpha_sqrt(u, ut, eos, axis, check=check)
    if kind == BOUND_ALPHA_TILDE:
        return alpha_tilde(u, ut, eos, axis, check=check)
    raise MhdDomainError(f"unknown bound kind {kind!r}")
