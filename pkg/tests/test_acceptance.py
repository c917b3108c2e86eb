"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (straight to the real stdout so the
lines survive pytest capture).  The heavy simulations (criteria 6-9) run
at the stated desk scales; expect the module to take tens of minutes.
"""

import sys
import time

import numpy as np

from ppmhd.bounds import BOUND_ALPHA_SQRT, BOUND_STANDARD, alpha_sqrt, \
    spectral_radius, strict_exceed
from ppmhd.flux import glf_average_1d
from ppmhd.fv import axis_alpha, lf_step_1d, lf_step_2d
from ppmhd.presets import RunConfig, counterexample_1d_grid, \
    counterexample_2d_grid
from ppmhd.runner import EXIT_INADMISSIBLE, EXIT_OK, convergence, run
from ppmhd.states import IdealGasEos, _ienergy_raw, \
    is_admissible
from ppmhd.verify import run_suite

EOS = IdealGasEos(1.4)

PAIR_HAT = np.array([0.2, 0.0, 0.2, 0.0, 10.0, 5.0, 0.0, 62.625])
PAIR_CHECK = np.array([0.32, 0.0, -0.32, 0.0, 10.0, 10.0, 0.0, 100.16025])


def _report(num, label, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {label}"
    if detail:
        line += f" ({detail})"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def test_criterion_1_split_average_fidelity():
    t0 = time.time()
    a1 = float(max(spectral_radius(PAIR_HAT, EOS, 1),
                   spectral_radius(PAIR_CHECK, EOS, 1)))
    u_std = glf_average_1d(PAIR_HAT, PAIR_CHECK, EOS, a1, _bypass_checks=True)
    en_std = float(_ienergy_raw(u_std))
    bound = float(alpha_sqrt(PAIR_HAT, PAIR_CHECK, EOS, 1))
    u_ok = glf_average_1d(PAIR_HAT, PAIR_CHECK, EOS,
                          float(strict_exceed(bound)))
    ok = en_std < -0.05 and bool(is_admissible(u_ok))
    _report(1, "split average fails at standard viscosity, admissible at "
               "the pairwise bound", ok,
            f"ienergy={en_std:.4f}, {time.time() - t0:.2f}s")


def test_criterion_2_1d_standard_viscosity():
    t0 = time.time()
    negative = []
    for cfl in (0.1, 0.5, 0.9):
        grid = counterexample_1d_grid((5,), {"p": 1e-5})
        alpha = axis_alpha(grid, EOS, 1, BOUND_STANDARD)
        out = lf_step_1d(grid, EOS, cfl * grid.geom.spacings[0] / alpha,
                         alpha)
        negative.append(float(_ienergy_raw(out.interior[2])) < 0)
    grid = counterexample_1d_grid((5,), {"p": 1e-8})
    alpha = axis_alpha(grid, EOS, 1, BOUND_STANDARD)
    out = lf_step_1d(grid, EOS, grid.geom.spacings[0] / alpha, alpha)
    en_limit = float(_ienergy_raw(out.interior[2]))
    limit_ok = abs(en_limit - (-0.0675)) < 1e-3
    pp_ok = True
    for cfl in np.arange(0.1, 1.0001, 0.1):
        grid = counterexample_1d_grid((5,), {"p": 1e-5})
        alpha = axis_alpha(grid, EOS, 1, BOUND_ALPHA_SQRT)
        out = lf_step_1d(grid, EOS, cfl * grid.geom.spacings[0] / alpha,
                         alpha)
        pp_ok &= bool(np.all(is_admissible(out.interior)))
    ok = all(negative) and limit_ok and pp_ok
    _report(2, "1D standard viscosity loses positivity; pairwise bound "
               "restores it", ok,
            f"limit ienergy={en_limit:.5f} vs -0.0675, "
            f"{time.time() - t0:.2f}s")


def test_criterion_3_2d_any_viscosity():
    t0 = time.time()
    negative = []
    for chi in (1.0, 2.0, 50.0):
        grid = counterexample_2d_grid((5, 5),
                                      {"p": 1e-8, "eps": 1e-3, "chi": chi})
        a1 = chi * float(np.max(spectral_radius(grid.u, EOS, 1)))
        a2 = chi * float(np.max(spectral_radius(grid.u, EOS, 2)))
        dt = 1.0 / (a1 + a2)
        out = lf_step_2d(grid, EOS, dt, a1, a2)
        negative.append(float(_ienergy_raw(out.interior[2, 2])) < 0)
    # limit-formula comparison at chi=1, C=1, p=1e-10
    eps = 1e-3
    grid = counterexample_2d_grid((5, 5), {"p": 1e-10, "eps": eps, "chi": 1.0})
    a1 = float(np.max(spectral_radius(grid.u, EOS, 1)))
    a2 = float(np.max(spectral_radius(grid.u, EOS, 2)))
    out = lf_step_2d(grid, EOS, 1.0 / (a1 + a2), a1, a2)
    en = float(_ienergy_raw(out.interior[2, 2]))
    limit = -eps * (2 + eps) * (8 + eps - 4 * eps) / (32 * (3 + 2 * eps))
    rel = abs(en - limit) / abs(limit)
    ok = all(negative) and rel < 0.05
    _report(3, "2D scheme loses positivity for every viscosity multiplier",
            ok, f"ienergy={en:.6e} vs limit {limit:.6e} "
                f"(rel {rel:.2%}), {time.time() - t0:.2f}s")


def test_criterion_4_property_suites():
    t0 = time.time()
    failures = {}
    for name in ("admissibility-algebra", "lemma24", "prop26", "prop27",
                 "glf-1d", "glf-2d", "glf-3d", "limiter", "dg-decomposition",
                 "thm47-bound"):
        res = run_suite(name, trials=10000, seed=0)
        if res.failures or res.trials < 10000:
            failures[name] = (res.trials, res.failures)
    elapsed = time.time() - t0
    ok = not failures and elapsed < 120.0
    _report(4, "property suites, >= 1e4 trials each, zero failures",
            ok, f"{elapsed:.1f}s" + (f" failures={failures}" if failures
                                     else ""))


def test_criterion_5_divergence_monotonicity():
    t0 = time.time()
    res = run_suite("ddf-monotone", trials=1000, seed=0)
    elapsed = time.time() - t0
    ok = res.failures == 0 and res.trials == 1000 and elapsed < 60.0
    _report(5, "divergence sup-norm non-increasing over 50-step chains",
            ok, f"{res.trials} grids, {elapsed:.1f}s")


def test_criterion_6_convergence_orders():
    t0 = time.time()
    cfg = RunConfig(preset="sine-1d", order=2, limiter="pp", cfl=0.15)
    rows, _ = convergence(cfg, [40, 80, 160, 320, 640])
    got = [r["order_l1"] for r in rows[1:]]
    table = (2.52, 2.84, 2.97, 3.00)
    ok_1d = all(abs(g - t) <= 0.15 for g, t in zip(got, table))

    cfg = RunConfig(preset="sine-2d", order=2, limiter="pp", cfl=0.15)
    rows2, _ = convergence(cfg, [32, 64, 128])
    ok_2d = rows2[-1]["order_vec_l1"] >= 2.8

    cfg = RunConfig(preset="vortex-2d", order=2, limiter="pp", cfl=0.15)
    rows3, _ = convergence(cfg, [32, 64, 128])
    ok_vortex = rows3[-1]["order_vec_l1"] >= 2.8

    ok = ok_1d and ok_2d and ok_vortex
    _report(6, "third-order convergence with the positivity limiter", ok,
            "sine-1d orders " + ", ".join(f"{g:.2f}" for g in got)
            + f" vs table {table}; sine-2d {rows2[-1]['order_vec_l1']:.2f}; "
              f"vortex {rows3[-1]['order_vec_l1']:.2f}; "
              f"{time.time() - t0:.0f}s")


def test_criterion_7_vacuum_shock_tube(tmp_path):
    t0 = time.time()
    cfg = RunConfig(preset="vacuum-tube-1d", cells=(200,), order=2,
                    limiter="pp", cfl=0.15, tend=0.1,
                    out=str(tmp_path / "vt_pp"))
    res = run(cfg)
    ext = np.genfromtxt(res.outdir / "extrema_history.csv", delimiter=",",
                        names=True)
    ok_run = (res.exit_code == EXIT_OK
              and float(np.min(ext["min_rho"])) > 0.0
              and float(np.min(ext["min_p"])) > 0.0)

    cfg2 = RunConfig(preset="vacuum-tube-1d", cells=(200,), order=2,
                     limiter="none", cfl=0.15, tend=0.1,
                     out=str(tmp_path / "vt_none"))
    res2 = run(cfg2)
    ok_fail = res2.exit_code == EXIT_INADMISSIBLE and res2.steps < 50
    _report(7, "vacuum shock tube: positive with the limiter, exit 2 "
               "within 50 steps without", ok_run and ok_fail,
            f"min rho {float(np.min(ext['min_rho'])):.2e}, unlimited fails "
            f"at step {res2.steps}, {time.time() - t0:.0f}s")


def test_criterion_8_blast(tmp_path):
    t0 = time.time()
    cfg = RunConfig(preset="blast-2d", cells=(160, 160), order=2,
                    limiter="pp", cfl=0.15, tend=0.01,
                    out=str(tmp_path / "blast_pp"))
    res = run(cfg)
    ok_run = res.exit_code == EXIT_OK
    cfg2 = RunConfig(preset="blast-2d", cells=(160, 160), order=2,
                     limiter="none", cfl=0.15, tend=0.01,
                     out=str(tmp_path / "blast_none"))
    res2 = run(cfg2)
    ok_fail = res2.exit_code == EXIT_INADMISSIBLE and res2.t_final < 1e-3
    _report(8, "blast runs to t=0.01 with the limiter; unlimited fails "
               "before t=1e-3", ok_run and ok_fail,
            f"unlimited failure at t={res2.t_final:.3e}, "
            f"{time.time() - t0:.0f}s")


def test_criterion_9_jet_diagnostic(tmp_path):
    t0 = time.time()
    cfg = RunConfig(preset="jet-2d-weak", cells=(200, 300), order=2,
                    limiter="pp", cfl=0.15, tend=0.002,
                    out=str(tmp_path / "jet_weak"))
    res = run(cfg)
    ok_weak = res.exit_code == EXIT_OK

    cfg2 = RunConfig(preset="jet-2d-strong", cells=(200, 300), order=2,
                     limiter="pp", cfl=0.15, tend=0.002,
                     out=str(tmp_path / "jet_strong"))
    res2 = run(cfg2)
    ok_strong = res2.exit_code == EXIT_INADMISSIBLE
    ok_delta = False
    detail = ""
    if ok_strong and res2.failure and res2.failure.get("delta") is not None:
        avg = res2.failure["averages"]
        delta = res2.failure["delta"]
        bad = ~is_admissible(avg)
        ok_delta = (bool(np.all(delta[bad] <= -1.0))
                    and bool(np.all(delta[~bad] > -1.0)))
        detail = (f"strong fails at t={res2.failure['time']:.3e}, "
                  f"{int(bad.sum())} bad cells, max bad delta "
                  f"{float(np.max(delta[bad])):.3f}, min good delta "
                  f"{float(np.min(delta[~bad])):.3f}")
    _report(9, "jet: weak field runs to t=0.002; strong field exits 2 with "
               "the divergence ratio classifying every cell",
            ok_weak and ok_strong and ok_delta,
            detail + f", {time.time() - t0:.0f}s")
