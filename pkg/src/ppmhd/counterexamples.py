"""Hand-checkable probes that defeat the naive positivity expectations.

Each harness constructs the probe states, runs the real operation or
scheme on them, and reports the computed internal energy or pressure next
to the corresponding closed-form limit value, so the two can be compared
side by side.
"""

from __future__ import annotations

import numpy as np

from .bounds import BOUND_ALPHA_SQRT, BOUND_STANDARD, alpha_sqrt, \
    spectral_radius, strict_exceed
from .exceptions import MhdDomainError
from .flux import glf_average_1d, lf_splitting_counterexample
from .fv import axis_alpha, lf_step_1d, lf_step_2d
from .presets import counterexample_1d_grid, counterexample_2d_grid
from .randstates import random_admissible, rng_for
from .states import BX, EN, IdealGasEos, M_SLC, RHO, B_SLC, _ienergy_raw, \
    internal_energy, is_admissible

EOS = IdealGasEos(1.4)

PAIR_HAT = np.array([0.2, 0.0, 0.2, 0.0, 10.0, 5.0, 0.0, 62.625])
PAIR_CHECK = np.array([0.32, 0.0, -0.32, 0.0, 10.0, 10.0, 0.0, 100.16025])


def lf_splitting(chi=1.0, p=1e-6):
    """Plain splitting probe: U +- F1/ (chi * spectral radius)."""
    rep = lf_splitting_counterexample(EOS, chi, p)
    return {
        "name": "lf-splitting",
        "state": rep.state,
        "alpha": rep.alpha,
        "ienergy": {"plus": rep.ienergy_plus, "minus": rep.ienergy_minus},
        "closed_form": rep.closed_form,
        "zero_pressure_limit": rep.zero_pressure_limit,
        "violates": rep.violates,
    }


def glf_alpha_a1(sweep_trials=0, seed=0):
    """Split average of the admissible pair at the standard viscosity:
    inadmissible; at the pairwise bound: admissible.

    sweep_trials > 0 additionally measures how often the standard
    viscosity fails over random equal-B1 admissible pairs (an empirical
    frequency with no analytical reference).
    """
    a1 = float(max(spectral_radius(PAIR_HAT, EOS, 1),
                   spectral_radius(PAIR_CHECK, EOS, 1)))
    bound = float(alpha_sqrt(PAIR_HAT, PAIR_CHECK, EOS, 1))
    u_std = glf_average_1d(PAIR_HAT, PAIR_CHECK, EOS, a1, _bypass_checks=True)
    u_ok = glf_average_1d(PAIR_HAT, PAIR_CHECK, EOS, strict_exceed(bound))
    out = {
        "name": "glf-alpha-a1",
        "pair": (PAIR_HAT, PAIR_CHECK),
        "a1": a1,
        "bound": bound,
        "ienergy_at_a1": float(_ienergy_raw(u_std)),
        "ienergy_at_bound": float(internal_energy(u_ok)),
        "admissible_at_bound": bool(is_admissible(u_ok)),
    }
    if sweep_trials:
        rng = rng_for(seed)
        u = random_admissible(rng, sweep_trials)
        ut = random_admissible(rng, sweep_trials)
        ut[:, BX] = u[:, BX]
        en = rng.uniform(1e-6, 5.0, sweep_trials)
        ut[:, EN] = (en + 0.5 * np.sum(ut[:, M_SLC] ** 2, -1) / ut[:, RHO]
                     + 0.5 * np.sum(ut[:, B_SLC] ** 2, -1))
        a_std = np.maximum(spectral_radius(u, EOS, 1),
                           spectral_radius(ut, EOS, 1))
        ubar = glf_average_1d(u, ut, EOS, a_std, _bypass_checks=True)
        fails = int(np.count_nonzero(~is_admissible(ubar)))
        out["standard_alpha_failure_rate"] = fails / sweep_trials
        out["sweep_trials"] = sweep_trials
    return out


def one_d_standard_viscosity(p=1e-5, cfls=(0.1, 0.5, 0.9)):
    """One LF step on the three-state data: standard viscosity loses
    pressure positivity at every CFL; the pairwise bound never does."""
    if not 0.0 < p < 1.0 / 800.0:
        raise MhdDomainError("p must lie in (0, 1/800) for this probe")
    rows = []
    for c in cfls:
        grid = counterexample_1d_grid((5,), {"p": p})
        alpha = axis_alpha(grid, EOS, 1, BOUND_STANDARD)
        dt = c * grid.geom.spacings[0] / alpha
        out = lf_step_1d(grid, EOS, dt, alpha)
        mid = out.interior[grid.geom.counts[0] // 2]
        en = float(_ienergy_raw(mid))
        limit = (3.0 * c / 400.0) * (8 * c ** 2 + 75 * c - 200) / (25 - 12 * c)
        rows.append({"cfl": c, "alpha": alpha, "ienergy": en,
                     "pressure": (EOS.gamma - 1.0) * en,
                     "zero_pressure_limit": limit})
    pp_rows = []
    for c in cfls:
        grid = counterexample_1d_grid((5,), {"p": p})
        alpha = axis_alpha(grid, EOS, 1, BOUND_ALPHA_SQRT)
        dt = c * grid.geom.spacings[0] / alpha
        out = lf_step_1d(grid, EOS, dt, alpha)
        en_min = float(np.min(_ienergy_raw(out.interior)))
        pp_rows.append({"cfl": c, "alpha": alpha, "min_ienergy": en_min})
    alpha_ref = (np.sqrt(5) / 4.0) * np.sqrt(
        7 * p + 1e3 + np.sqrt(49 * p ** 2 + 1e6))
    return {"name": "1d-standard-viscosity", "p": p,
            "alpha_closed_form": float(alpha_ref), "standard": rows,
            "pp_bound": pp_rows}


def two_d_any_viscosity(chi=1.0, eps=1e-3, p=1e-8, cfl=1.0):
    """One 2D LF step on the slightly divergence-violating data."""
    if not 0.0 < p < 1.0 / EOS.gamma:
        raise MhdDomainError("p must lie in (0, 1/gamma) for this probe")
    if not 0.0 < eps < 1.0 / chi:
        raise MhdDomainError("eps must lie in (0, 1/chi) for this probe")
    if chi < 1.0:
        raise MhdDomainError("chi must be at least 1")
    grid = counterexample_2d_grid((5, 5), {"p": p, "eps": eps, "chi": chi})
    a1 = chi * float(np.max(spectral_radius(grid.u, EOS, 1)))
    a2 = chi * float(np.max(spectral_radius(grid.u, EOS, 2)))
    dx, dy = grid.geom.spacings
    dt = cfl / (a1 / dx + a2 / dy)
    out = lf_step_2d(grid, EOS, dt, a1, a2)
    ci, cj = (n // 2 for n in grid.geom.counts)
    en = float(_ienergy_raw(out.interior[ci, cj]))
    limit = (-eps * cfl * (2 + eps) * (8 * chi + eps - 4 * eps * chi ** 2)
             / (32 * chi ** 2 * (2 + eps + (1 + eps) * dx / dy)))
    return {"name": "2d-any-viscosity", "chi": chi, "eps": eps, "p": p,
            "cfl": cfl, "alphas": (a1, a2), "ienergy": en,
            "pressure": (EOS.gamma - 1.0) * en,
            "zero_pressure_limit": limit,
            "ddf_residual": eps / (2.0 * dx)}


HARNESSES = {
    "lf-splitting": lf_splitting,
    "glf-alpha-a1": glf_alpha_a1,
    "1d-standard-viscosity": one_d_standard_viscosity,
    "2d-any-viscosity": two_d_any_viscosity,
}
