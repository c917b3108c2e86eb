"""Randomized verification suites behind the `verify` CLI subcommand.

Every suite draws reproducible inputs from a seeded generator, exercises
the public operations, and counts violations of the corresponding
guarantee.  A failing suite reports the seed and a reproducing input.
Trials can be partitioned across worker processes (PPMHD_THREADS); chunk
seeds are derived deterministically so the merged counts do not depend on
scheduling.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .bounds import (
    alpha_hat,
    alpha_rho,
    alpha_sigma,
    alpha_sqrt,
    alpha_tilde,
    spectral_radius,
    strict_exceed,
)
from .dg import (
    DgField,
    dg_euler_step_2d,
    dg_axis_alphas,
    energy_bound_diagnostic,
    interface_divergence_field_2d,
    pp_limit_field,
)
from .flux import (
    WeightedQuadrupleSet2D,
    WeightedSextupleSet3D,
    glf_average_1d,
    glf_average_2d,
    glf_average_3d,
    onestate_inequality_lhs,
    splitting_inequality_lhs,
)
from .fv import divergence_sup, lf_step, max_dt
from .grid import PERIODIC, GridGeometry
from .randstates import (
    random_admissible,
    random_grid_1d,
    random_grid_2d,
    random_grid_3d,
    rng_for,
)
from .states import (
    B_SLC,
    BX,
    DEFAULT_TOL,
    EN,
    M_SLC,
    RHO,
    IdealGasEos,
    _ienergy_raw,
    gstar_functional,
    is_admissible,
    orthogonal_transform,
)

EOS = IdealGasEos(1.4)


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: int
    seed: int
    detail: str = ""
    examples: list = dc_field(default_factory=list)

    @property
    def ok(self):
        return self.failures == 0

    def merge(self, other):
        self.trials += other.trials
        self.failures += other.failures
        self.examples += other.examples
        if other.detail and not self.detail:
            self.detail = other.detail
        return self


def _result(name, trials, bad_mask, seed, payload=None, detail=""):
    bad_mask = np.atleast_1d(bad_mask)
    failures = int(np.count_nonzero(bad_mask))
    examples = []
    if failures and payload is not None:
        idx = int(np.argwhere(bad_mask)[0])
        examples.append({"index": idx, "input": np.asarray(payload)[idx]})
    return SuiteResult(name=name, trials=trials, failures=failures,
                       seed=seed, detail=detail, examples=examples)


# ----------------------------------------------------------------------
# State algebra
# ----------------------------------------------------------------------

def suite_admissibility_algebra(trials, seed):
    rng = rng_for(seed)
    u = random_admissible(rng, trials)
    v_star = rng.uniform(-10, 10, (trials, 3))
    b_star = rng.uniform(-10, 10, (trials, 3))
    bad = np.zeros(trials, dtype=bool)

    # Equivalent-set lower bound: functional >= internal energy > 0.
    g = gstar_functional(u, v_star, b_star)
    en = _ienergy_raw(u)
    bad |= g < en - 1e-12 * np.maximum(1.0, np.abs(en))
    bad |= en <= 0.0

    # Inadmissible side: non-positive energy makes the minimizing choice
    # of the functional non-positive.
    u_bad = np.array(u)
    u_bad[:, EN] -= en + np.abs(en) + 1e-6  # forces ienergy <= -1e-6
    v_min = u_bad[:, M_SLC] / u_bad[:, [RHO]]
    g_bad = gstar_functional(u_bad, v_min, u_bad[:, B_SLC])
    bad |= g_bad > 1e-12

    # Convexity along random admissible segments.
    u2 = random_admissible(rng, trials)
    lam = rng.uniform(0.0, 1.0, trials)
    mix = lam[:, None] * u + (1 - lam[:, None]) * u2
    bad |= ~is_admissible(mix, DEFAULT_TOL)

    # Concavity of the internal energy along the same segments.
    mix_en = _ienergy_raw(mix)
    lower = lam * en + (1 - lam) * _ienergy_raw(u2)
    bad |= mix_en < lower - 1e-10 * np.maximum(1.0, np.abs(lower))

    # Orthogonal invariance under a random rotation.
    theta = rng.uniform(0, 2 * np.pi)
    axis_seed = rng.normal(size=3)
    axis_seed /= np.linalg.norm(axis_seed)
    kmat = np.array([[0, -axis_seed[2], axis_seed[1]],
                     [axis_seed[2], 0, -axis_seed[0]],
                     [-axis_seed[1], axis_seed[0], 0]])
    rot = np.eye(3) + np.sin(theta) * kmat + (1 - np.cos(theta)) * kmat @ kmat
    bad |= ~is_admissible(orthogonal_transform(u, rot), DEFAULT_TOL)

    return _result("admissibility-algebra", trials, bad, seed, payload=u)


def suite_lemma24(trials, seed):
    """Two-state splitting inequality at every closed-form sigma choice."""
    rng = rng_for(seed)
    per = max(trials // 4, 1)
    bad_all = []
    us = []
    for mode in ("zero", "one", "rho", "sqrt"):
        u = random_admissible(rng, per)
        ut = random_admissible(rng, per)
        axis = int(rng.integers(1, 4))
        v_star = rng.uniform(-10, 10, (per, 3))
        b_star = rng.uniform(-10, 10, (per, 3))
        if mode == "zero":
            bound = alpha_sigma(u, ut, EOS, axis, 0.0)
        elif mode == "one":
            bound = alpha_sigma(u, ut, EOS, axis, 1.0)
        elif mode == "rho":
            bound = alpha_rho(u, ut, EOS, axis)
        else:
            bound = alpha_sqrt(u, ut, EOS, axis)
        alpha = strict_exceed(bound)
        sign = np.where(rng.uniform(size=per) < 0.5, 1.0, -1.0)
        lhs = splitting_inequality_lhs(u, ut, EOS, axis, sign * alpha,
                                       v_star, b_star)
        bad_all.append(lhs <= 0.0)
        us.append(u)
    return _result("lemma24", 4 * per, np.concatenate(bad_all), seed,
                   payload=np.concatenate(us))


def suite_prop26(trials, seed):
    """Closed-form bound comparisons against the spectral radius scale."""
    rng = rng_for(seed)
    u = random_admissible(rng, trials)
    ut = random_admissible(rng, trials)
    axis = 1 + (np.arange(trials) % 3)
    bad = np.zeros(trials, dtype=bool)
    for ax in (1, 2, 3):
        sel = axis == ax
        if not np.any(sel):
            continue
        a_i = np.maximum(spectral_radius(u[sel], EOS, ax),
                         spectral_radius(ut[sel], EOS, ax))
        bad[sel] |= alpha_sqrt(u[sel], ut[sel], EOS, ax) >= 2.0 * a_i
        vi = u[sel, MXAX(ax)] / u[sel, RHO]
        vti = ut[sel, MXAX(ax)] / ut[sel, RHO]
        c_i = _reduced_fast(u[sel], ax)
        ct_i = _reduced_fast(ut[sel], ax)
        extra = np.minimum(np.abs(np.abs(vi) - np.abs(vti)),
                           np.abs(c_i - ct_i))
        db = np.linalg.norm(u[sel][:, B_SLC] - ut[sel][:, B_SLC], axis=-1)
        rhs = a_i + extra + db / np.sqrt(
            2.0 * (u[sel, RHO] + ut[sel, RHO]))
        bad[sel] |= alpha_rho(u[sel], ut[sel], EOS, ax) >= rhs
    return _result("prop26", trials, bad, seed, payload=u)


def MXAX(ax):
    return ax  # momentum slot of axis ax (1-based slots 1..3)


def _reduced_fast(u, ax):
    from .bounds import _reduced_fast_and_v
    return _reduced_fast_and_v(u, EOS, ax)[3]


def suite_prop27(trials, seed):
    """One-state inequality just above the one-state bound, both signs."""
    rng = rng_for(seed)
    u = random_admissible(rng, trials)
    v_star = rng.uniform(-10, 10, (trials, 3))
    b_star = rng.uniform(-10, 10, (trials, 3))
    axis = int(rng.integers(1, 4))
    bound = alpha_hat(u, EOS, axis, v_star[:, axis - 1])
    alpha = strict_exceed(bound)
    sign = np.where(rng.uniform(size=trials) < 0.5, 1.0, -1.0)
    lhs = onestate_inequality_lhs(u, EOS, axis, sign * alpha, v_star, b_star)
    return _result("prop27", trials, lhs <= 0.0, seed, payload=u)


# ----------------------------------------------------------------------
# Generalized splitting averages
# ----------------------------------------------------------------------

def suite_glf_1d(trials, seed):
    rng = rng_for(seed)
    uhat = random_admissible(rng, trials)
    ucheck = random_admissible(rng, trials)
    ucheck[:, BX] = uhat[:, BX]
    # keep admissibility after the B1 edit by rebuilding the energy
    en = rng.uniform(1e-6, 5.0, trials)
    ucheck[:, EN] = (en + 0.5 * np.sum(ucheck[:, M_SLC] ** 2, -1)
                     / ucheck[:, RHO] + 0.5 * np.sum(ucheck[:, B_SLC] ** 2, -1))
    # split bounds: also exercise the alternative one on a slice
    bound = alpha_sqrt(uhat, ucheck, EOS, 1)
    nalt = trials // 10
    if nalt:
        bound[:nalt] = np.maximum(
            bound[:nalt], alpha_tilde(uhat[:nalt], ucheck[:nalt], EOS, 1))
    alpha = strict_exceed(bound)
    ubar = glf_average_1d(uhat, ucheck, EOS, alpha)
    return _result("glf-1d", trials, ~is_admissible(ubar, DEFAULT_TOL), seed,
                   payload=uhat)


def _ddf_quadruple(rng, q, dx, dy):
    fam = [random_admissible(rng, q) for _ in range(4)]
    omega = rng.uniform(0.2, 1.0, q)
    omega /= omega.sum()
    u_bar, u_tilde, u_hat, u_check = fam
    # Solve for u_bar[0]'s B1 so the weighted residual vanishes.
    rx_tail = np.sum(omega[1:] * (u_bar[1:, BX] - u_tilde[1:, BX])) / dx
    ry = np.sum(omega * (u_hat[:, BX + 1] - u_check[:, BX + 1])) / dy
    u_bar[0, BX] = u_tilde[0, BX] - (rx_tail + ry) * dx / omega[0]
    en = rng.uniform(1e-6, 5.0)
    u_bar[0, EN] = (en + 0.5 * np.sum(u_bar[0, M_SLC] ** 2) / u_bar[0, RHO]
                    + 0.5 * np.sum(u_bar[0, B_SLC] ** 2))
    return WeightedQuadrupleSet2D(u_bar=u_bar, u_tilde=u_tilde, u_hat=u_hat,
                                  u_check=u_check, omega=omega, dx=dx, dy=dy)


def suite_glf_2d(trials, seed):
    rng = rng_for(seed)
    failures = 0
    example = None
    for n in range(trials):
        q = int(rng.integers(1, 4))
        dx, dy = rng.uniform(0.1, 2.0, 2)
        qset = _ddf_quadruple(rng, q, dx, dy)
        a1 = strict_exceed(np.max(alpha_sqrt(qset.u_bar, qset.u_tilde, EOS, 1)))
        a2 = strict_exceed(np.max(alpha_sqrt(qset.u_hat, qset.u_check, EOS, 2)))
        ubar = glf_average_2d(qset, EOS, float(a1), float(a2))
        if not bool(is_admissible(ubar, DEFAULT_TOL)):
            failures += 1
            example = example or {"index": n, "input": ubar}
    return SuiteResult("glf-2d", trials, failures, seed,
                       examples=[example] if example else [])


def _ddf_sextuple(rng, q, dx, dy, dz):
    fam = [random_admissible(rng, q) for _ in range(6)]
    omega = rng.uniform(0.2, 1.0, q)
    omega /= omega.sum()
    u_bar, u_tilde, u_hat, u_check, u_acute, u_grave = fam
    rx_tail = np.sum(omega[1:] * (u_bar[1:, BX] - u_tilde[1:, BX])) / dx
    ry = np.sum(omega * (u_hat[:, BX + 1] - u_check[:, BX + 1])) / dy
    rz = np.sum(omega * (u_acute[:, BX + 2] - u_grave[:, BX + 2])) / dz
    u_bar[0, BX] = u_tilde[0, BX] - (rx_tail + ry + rz) * dx / omega[0]
    en = rng.uniform(1e-6, 5.0)
    u_bar[0, EN] = (en + 0.5 * np.sum(u_bar[0, M_SLC] ** 2) / u_bar[0, RHO]
                    + 0.5 * np.sum(u_bar[0, B_SLC] ** 2))
    return WeightedSextupleSet3D(u_bar=u_bar, u_tilde=u_tilde, u_hat=u_hat,
                                 u_check=u_check, u_acute=u_acute,
                                 u_grave=u_grave, omega=omega,
                                 dx=dx, dy=dy, dz=dz)


def suite_glf_3d(trials, seed):
    rng = rng_for(seed)
    failures = 0
    example = None
    for n in range(trials):
        q = int(rng.integers(1, 4))
        dx, dy, dz = rng.uniform(0.1, 2.0, 3)
        sset = _ddf_sextuple(rng, q, dx, dy, dz)
        a1 = strict_exceed(np.max(alpha_sqrt(sset.u_bar, sset.u_tilde, EOS, 1)))
        a2 = strict_exceed(np.max(alpha_sqrt(sset.u_hat, sset.u_check, EOS, 2)))
        a3 = strict_exceed(np.max(alpha_sqrt(sset.u_acute, sset.u_grave, EOS, 3)))
        ubar = glf_average_3d(sset, EOS, float(a1), float(a2), float(a3))
        if not bool(is_admissible(ubar, DEFAULT_TOL)):
            failures += 1
            example = example or {"index": n, "input": ubar}
    return SuiteResult("glf-3d", trials, failures, seed,
                       examples=[example] if example else [])


# ----------------------------------------------------------------------
# Scheme-level positivity and divergence suites
# ----------------------------------------------------------------------

def suite_scheme_pp_1d(trials, seed):
    rng = rng_for(seed)
    failures = 0
    for _ in range(trials):
        grid = random_grid_1d(rng, n=int(rng.integers(8, 24)))
        cfl = float(rng.choice([0.1, 0.5, 1.0]))
        b1_before = np.array(grid.interior[:, BX])
        dt, alphas = max_dt(grid, EOS, cfl)
        out = lf_step(grid, EOS, dt, alphas)
        ok = np.all(is_admissible(out.interior, DEFAULT_TOL))
        drift = np.max(np.abs(out.interior[:, BX] - b1_before))
        if not ok or drift > 1e-14 * max(1.0, np.max(np.abs(b1_before))):
            failures += 1
    return SuiteResult("scheme-pp-1d", trials, failures, seed)


def _pp_grid_trial(rng, builder, dim):
    grid = builder(rng)
    cfl = float(rng.choice([0.5, 1.0]))
    dt, alphas = max_dt(grid, EOS, cfl)
    div_before = divergence_sup(grid)
    out = lf_step(grid, EOS, dt, alphas)
    ok = np.all(is_admissible(out.interior, DEFAULT_TOL))
    ddf_kept = divergence_sup(out) <= max(div_before, 1e-13)
    return ok and ddf_kept


def suite_scheme_pp_2d(trials, seed):
    rng = rng_for(seed)
    failures = 0
    for _ in range(trials):
        if not _pp_grid_trial(
                rng, lambda r: random_grid_2d(r, shape=(
                    int(r.integers(6, 14)), int(r.integers(6, 14)))), 2):
            failures += 1
    return SuiteResult("scheme-pp-2d", trials, failures, seed)


def suite_scheme_pp_3d(trials, seed):
    rng = rng_for(seed)
    failures = 0
    for _ in range(trials):
        if not _pp_grid_trial(
                rng, lambda r: random_grid_3d(r, shape=(
                    int(r.integers(5, 9)),) * 3), 3):
            failures += 1
    return SuiteResult("scheme-pp-3d", trials, failures, seed)


def suite_ddf_monotone(trials, seed, steps=50):
    """Divergence sup-norm never increases across LF steps (CFL <= 1)."""
    rng = rng_for(seed)
    failures = 0
    for n in range(trials):
        exact = bool(n % 4 == 0)
        grid = random_grid_2d(rng, shape=(int(rng.integers(6, 12)),) * 2,
                              exact_ddf=exact)
        sup = divergence_sup(grid)
        ok = True
        for _ in range(steps):
            dt, alphas = max_dt(grid, EOS, 1.0)
            grid = lf_step(grid, EOS, dt, alphas)
            new_sup = divergence_sup(grid)
            if new_sup > sup + 1e-13 * max(1.0, sup):
                ok = False
                break
            if exact and new_sup > 1e-13:
                ok = False
                break
            sup = new_sup
        if not ok:
            failures += 1
    return SuiteResult("ddf-monotone", trials, failures, seed)


# ----------------------------------------------------------------------
# DG suites
# ----------------------------------------------------------------------

def _random_dg_field_1d(rng, n, k=2, rough=1.0):
    geom = GridGeometry(counts=(n,), spacings=(1.0 / n,), origin=(0.0,))
    avg = random_admissible(rng, n, rho_range=(0.05, 5.0), v_max=2.0,
                            b_max=2.0, p_range=(1e-4, 5.0))
    field = DgField.from_cell_averages(geom, (PERIODIC,), avg, k)
    nc = field.coef.shape[-1]
    dev = rng.normal(scale=rough, size=(n, 8, nc - 1))
    scale = np.abs(avg)[:, :, None] * 0.5 + 0.05
    field.interior_coef[..., 1:] = dev * scale
    field.fill_ghosts()
    return field


def suite_limiter(trials, seed):
    """Idempotence, mean preservation and node admissibility of the
    positivity limiter over random rough polynomials."""
    rng = rng_for(seed)
    field = _random_dg_field_1d(rng, trials)
    before = np.array(field.cell_averages)
    limited = pp_limit_field(field, EOS)
    basis = limited.basis
    g = limited.geom.ghost
    # density floor holds on the extended set (flux-evaluation safety);
    # the energy floor is enforced at the decomposition nodes
    rho_nodes = limited.eval_nodes(basis.phi_pp)[g:-g, RHO, :]
    en_nodes = _ienergy_raw(
        np.moveaxis(limited.eval_nodes(basis.phi_decomp), -2, -1)[g:-g])
    floors_ok = (np.all(rho_nodes >= DEFAULT_TOL.eps_rho - 1e-15)
                 & np.all(en_nodes >= DEFAULT_TOL.eps_e - 1e-12))
    mean_drift = np.max(np.abs(limited.cell_averages - before)
                        / np.maximum(np.abs(before), 1e-30))
    twice = pp_limit_field(limited, EOS)
    idem = np.max(np.abs(twice.interior_coef - limited.interior_coef))
    scale = np.max(np.abs(limited.interior_coef))
    bad = np.zeros(trials, dtype=bool)
    if not floors_ok:
        bad[0] = True
    if mean_drift > 1e-14:
        bad[min(1, trials - 1)] = True
    if idem > 1e-12 * max(1.0, scale):
        bad[min(2, trials - 1)] = True
    return _result("limiter", trials, bad, seed,
                   detail=f"mean drift {mean_drift:.2e}, "
                          f"idempotence gap {idem:.2e}")


def suite_dg_decomposition(trials, seed):
    """Weighted node sums reconstruct cell averages for degree-k data."""
    rng = rng_for(seed)
    per = max(trials // 2, 1)
    bad = []
    # 1D Lobatto decomposition
    f1 = _random_dg_field_1d(rng, per)
    b1 = f1.basis
    rec = np.einsum("jcn,n->jc", f1.interior_coef @ b1.phi_lobatto,
                    b1.tables.lobatto_w)
    err = np.max(np.abs(rec - f1.cell_averages), axis=-1)
    bad.append(err > 1e-13 * np.maximum(1.0, np.abs(f1.cell_averages).max()))
    # 2D mixed tensor decompositions
    n2 = max(int(np.ceil(np.sqrt(per))), 2)
    geom = GridGeometry(counts=(n2, n2), spacings=(1.0 / n2, 1.0 / n2),
                        origin=(0.0, 0.0))
    avg = random_admissible(rng, n2 * n2).reshape(n2, n2, 8)
    f2 = DgField.from_cell_averages(geom, (PERIODIC, PERIODIC), avg, 2)
    nc = f2.coef.shape[-1]
    f2.interior_coef[..., 1:] = rng.normal(scale=0.3, size=(n2, n2, 8, nc - 1))
    f2.fill_ghosts()
    b2 = f2.basis
    lx = b2.tables.lobatto_x
    gx = b2.tables.gauss_x
    lw = b2.tables.lobatto_w
    gw = b2.tables.gauss_w
    from .dg import _eval_matrix_2d
    xi_a, eta_a = np.meshgrid(lx, gx, indexing="ij")
    phi_a = _eval_matrix_2d(2, xi_a.ravel(), eta_a.ravel())
    w_a = np.outer(lw, gw).ravel()
    xi_b, eta_b = np.meshgrid(gx, lx, indexing="ij")
    phi_b = _eval_matrix_2d(2, xi_b.ravel(), eta_b.ravel())
    w_b = np.outer(gw, lw).ravel()
    rec_a = np.einsum("ijcn,n->ijc", f2.interior_coef @ phi_a, w_a)
    rec_b = np.einsum("ijcn,n->ijc", f2.interior_coef @ phi_b, w_b)
    scale = np.maximum(1.0, np.abs(f2.cell_averages).max())
    err2 = np.maximum(np.max(np.abs(rec_a - f2.cell_averages), axis=-1),
                      np.max(np.abs(rec_b - f2.cell_averages), axis=-1))
    bad.append((err2 > 1e-13 * scale).ravel())
    allbad = np.concatenate(bad)
    return _result("dg-decomposition", allbad.size, allbad, seed)


def _node_admissible_field_2d(rng, shape, k=2):
    nx, ny = shape
    geom = GridGeometry(counts=shape, spacings=(1.0 / nx, 1.0 / ny),
                        origin=(0.0, 0.0))
    avg = random_admissible(rng, nx * ny, rho_range=(0.05, 5.0), v_max=2.0,
                            b_max=2.0, p_range=(1e-3, 5.0)).reshape(nx, ny, 8)
    field = DgField.from_cell_averages(geom, (PERIODIC, PERIODIC), avg, k)
    nc = field.coef.shape[-1]
    dev = rng.normal(scale=0.3, size=(nx, ny, 8, nc - 1))
    field.interior_coef[..., 1:] = dev * (np.abs(avg)[..., None] * 0.3 + 0.02)
    field.fill_ghosts()
    return pp_limit_field(field, EOS)


def suite_thm47_bound(trials, seed):
    """Internal-energy lower bound after one high-order Euler application:
    the positive part always beats the divergence-driven part."""
    rng = rng_for(seed)
    n = max(int(np.sqrt(trials)), 4)
    field = _node_admissible_field_2d(rng, (n, n))
    alphas = dg_axis_alphas(field, EOS)
    omega1 = field.basis.tables.omega_hat_1
    dt = omega1 / sum(a / d for a, d in zip(alphas, field.geom.spacings))
    div_n = interface_divergence_field_2d(field)
    out = dg_euler_step_2d(field, EOS, dt, alphas[0], alphas[1])
    avg = out.cell_averages
    rho_ok = avg[..., RHO] > 0.0
    safe = np.array(avg)
    safe[..., RHO] = np.where(rho_ok, avg[..., RHO], 1.0)
    p_part, _, _ = energy_bound_diagnostic(safe, div_n, dt)
    scale = np.maximum(1.0, np.abs(_ienergy_raw(safe)))
    bad = ~rho_ok | (p_part <= -1e-13 * scale)
    return _result("thm47-bound", avg[..., RHO].size, bad.ravel(), seed)


SUITES = {
    "admissibility-algebra": suite_admissibility_algebra,
    "lemma24": suite_lemma24,
    "prop26": suite_prop26,
    "prop27": suite_prop27,
    "glf-1d": suite_glf_1d,
    "glf-2d": suite_glf_2d,
    "glf-3d": suite_glf_3d,
    "scheme-pp-1d": suite_scheme_pp_1d,
    "scheme-pp-2d": suite_scheme_pp_2d,
    "scheme-pp-3d": suite_scheme_pp_3d,
    "ddf-monotone": suite_ddf_monotone,
    "limiter": suite_limiter,
    "dg-decomposition": suite_dg_decomposition,
    "thm47-bound": suite_thm47_bound,
}

DEFAULT_TRIALS = {
    "scheme-pp-1d": 1000,
    "scheme-pp-2d": 500,
    "scheme-pp-3d": 200,
    "ddf-monotone": 100,
    "glf-2d": 10000,
    "glf-3d": 10000,
}


def _worker_count():
    env = os.environ.get("PPMHD_THREADS", "")
    try:
        return max(int(env), 1)
    except ValueError:
        return 1


def _chunk(args):
    name, trials, seed = args
    return SUITES[name](trials, seed)


def run_suite(name, trials=None, seed=0, workers=None):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from "
                       f"{', '.join(sorted(SUITES))}")
    trials = trials or DEFAULT_TRIALS.get(name, 10000)
    workers = workers or _worker_count()
    if workers <= 1 or trials < 2 * workers:
        return SUITES[name](trials, seed)
    import multiprocessing as mp

    per = trials // workers
    jobs = [(name, per + (1 if i < trials - per * workers else 0),
             seed * 7919 + i) for i in range(workers)]
    with mp.Pool(workers) as pool:
        parts = pool.map(_chunk, jobs)
    out = parts[0]
    for part in parts[1:]:
        out.merge(part)
    out.seed = seed
    return out
