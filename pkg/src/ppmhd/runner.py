"""Simulation driver: builds initial states, advances them, emits artifacts.

Time step policy
----------------
First-order runs: dt = cfl / sum(alpha_axis / spacing) with the configured
viscosity bound (the positivity theory's own CFL), additionally capped by
the physical wave-speed CFL when the bound is below the spectral radius.
High-order runs: dt = cfl / sum(spectral_radius / spacing) for linear
stability of RK3 + P^k, capped so that sum(alpha dt / spacing) never
exceeds the endpoint Lobatto weight that the cell-average positivity
argument needs.

On loss of admissibility the run stops with exit status 2, writes a
failure snapshot, and (2D high-order) attaches the per-cell ratio of the
divergence-driven part of the internal energy to its positive remainder;
cells at or below -1 are exactly the ones whose negativity the pre-step
interface divergence explains.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from .bounds import BOUND_STANDARD
from .dg import (
    DgField,
    combine_fields,
    dg_euler_step_1d,
    dg_step_controls,
    dg_euler_step_2d,
    energy_bound_diagnostic,
    interface_divergence_field_2d,
    l2_project,
    pp_limit_field,
    project_b_divfree_2d,
    ssp_rk3,
    tvb_minmod_limiter,
)
from .exceptions import (
    ConfigError,
    InadmissibleStateError,
    MhdDomainError,
    NumericalBlowupError,
    PpmhdError,
)
from .fv import divergence_sup, init_cellavg_1d, init_cellavg_2d, \
    init_cellavg_3d, lf_step, max_dt
from .grid import CartesianGrid, GridGeometry
from .presets import AnalyticFields, RunConfig, get_preset, inline_fields
from .quadrature import gauss_rule
from .states import DEFAULT_TOL, IdealGasEos, RHO, _ienergy_raw, is_admissible
from . import reports

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INADMISSIBLE = 2
EXIT_SUITE_FAILURE = 3


@dataclass
class Problem:
    config: RunConfig
    dim: int
    eos: IdealGasEos
    geom: GridGeometry
    rules: tuple
    tend: float
    fields: Optional[AnalyticFields]
    grid_builder: Optional[callable]
    exact: Optional[callable]
    smooth: bool
    name: str


def resolve_problem(config: RunConfig) -> Problem:
    if config.preset is not None:
        preset = get_preset(config.preset)
        cells = config.cells or preset.default_cells
        params = {**preset.params, **config.params}
        geom = preset.geometry(cells)
        builder = None
        if preset.grid_builder is not None:
            builder = lambda: preset.grid_builder(cells, params)  # noqa: E731
        return Problem(
            config=config, dim=preset.dim, eos=IdealGasEos(preset.gamma),
            geom=geom, rules=preset.boundary,
            tend=config.tend if config.tend is not None else preset.tend,
            fields=preset.fields, grid_builder=builder, exact=preset.exact,
            smooth=preset.smooth, name=preset.name)

    section = dict(config.inline)
    try:
        dim = int(section.pop("dim", "1"))
    except ValueError as exc:
        raise ConfigError(f"[problem] dim: {exc}") from exc
    if dim not in (1, 2, 3):
        raise ConfigError("inline problems support dim 1, 2 or 3")
    gamma = float(section.pop("gamma", "1.4"))
    domains = []
    for ax, name in zip(range(dim), ("x", "y", "z")):
        text = section.pop(f"domain_{name}", "0,1")
        lo, hi = (float(v) for v in text.split(","))
        domains.append((lo, hi))
    bc = section.pop("boundary", "periodic").strip()
    from .grid import OUTFLOW, PERIODIC
    if bc == "periodic":
        rules = tuple(PERIODIC for _ in range(dim))
    elif bc == "outflow":
        rules = tuple((OUTFLOW, OUTFLOW) for _ in range(dim))
    else:
        raise ConfigError(f"[problem] boundary must be periodic|outflow, got {bc}")
    cells = config.cells or (32,) * dim
    if len(cells) != dim:
        raise ConfigError(f"cells {cells} does not match dim {dim}")
    spacings = tuple((hi - lo) / n for (lo, hi), n in zip(domains, cells))
    geom = GridGeometry(counts=cells, spacings=spacings,
                        origin=tuple(lo for lo, _ in domains))
    fields = inline_fields(section, dim)
    return Problem(config=config, dim=dim, eos=IdealGasEos(gamma), geom=geom,
                   rules=rules, tend=config.tend or 0.1, fields=fields,
                   grid_builder=None, exact=None, smooth=False, name="inline")


# ----------------------------------------------------------------------
# Initial states
# ----------------------------------------------------------------------

def build_initial_grid(problem: Problem) -> CartesianGrid:
    if problem.grid_builder is not None:
        return problem.grid_builder()
    init = {1: init_cellavg_1d, 2: init_cellavg_2d, 3: init_cellavg_3d}
    return init[problem.dim](problem.fields, problem.geom, problem.rules,
                             problem.eos)


def build_initial_field(problem: Problem) -> DgField:
    cfg = problem.config
    if problem.grid_builder is not None:
        grid = problem.grid_builder()
        field = DgField.from_cell_averages(grid.geom, grid.rules,
                                           grid.interior, cfg.order)
    else:
        field = l2_project(problem.fields, problem.geom, problem.rules,
                           cfg.order, problem.eos)
    field = _apply_chain(field, problem, init=True)
    return field


def _apply_chain(field: DgField, problem: Problem, init=False,
                 in_place=False) -> DgField:
    """Limit a freshly built stage output (the in_place flag must only be
    set for fields no one else references)."""
    cfg = problem.config
    if cfg.limiter == "pp+tvb" and not init:
        field = tvb_minmod_limiter(field, cfg.tvb_m, eos=problem.eos)
        in_place = True
    if cfg.divfree and field.dim == 2 and field.k >= 1:
        field = project_b_divfree_2d(field, in_place=in_place)
        in_place = True
    if cfg.limiter in ("pp", "pp+tvb"):
        field = pp_limit_field(field, problem.eos, in_place=in_place)
    return field


# ----------------------------------------------------------------------
# Evolution core
# ----------------------------------------------------------------------

@dataclass
class _StageFailure(PpmhdError, Exception):
    """Raised when a forward-Euler application leaves the admissible set."""

    averages: np.ndarray
    div_before: Optional[np.ndarray]
    dt: float
    message: str = "stage produced inadmissible cell averages"


@dataclass
class RunState:
    t: float = 0.0
    step: int = 0
    history: list = dc_field(default_factory=list)   # dict rows
    failure: Optional[dict] = None
    status: int = EXIT_OK


def _dg_stage(field, problem, dt, alphas):
    """One forward-Euler application with the per-step viscosities.

    On inadmissible output the pre-stage interface divergence is computed
    lazily from the stage input for the failure diagnostic.
    """
    cfg = problem.config
    eos = problem.eos

    def div_of_input():
        return (interface_divergence_field_2d(field)
                if field.dim == 2 else None)

    try:
        if field.dim == 1:
            out = dg_euler_step_1d(field, eos, dt, alphas[0],
                                   strict=cfg.strict)
        else:
            out = dg_euler_step_2d(field, eos, dt, alphas[0], alphas[1],
                                   strict=cfg.strict)
    except (NumericalBlowupError, MhdDomainError) as exc:
        # Non-positive trace states mid-step are an admissibility loss.
        raise _StageFailure(averages=None, div_before=div_of_input(), dt=dt,
                            message=str(exc))
    avg = out.cell_averages
    if not np.all(is_admissible(avg, DEFAULT_TOL)):
        raise _StageFailure(averages=np.array(avg),
                            div_before=div_of_input(), dt=dt)
    return _apply_chain(out, problem, in_place=True)


def _dg_dt(field, problem):
    """Per-step (dt, viscosities): physical CFL for linear stability, the
    endpoint-weight cap for provable cell-average positivity."""
    cfg = problem.config
    spacings = field.geom.spacings
    bound_alphas, spect = dg_step_controls(field, problem.eos, cfg.bound)
    if field.k == 0:
        return (cfg.cfl / sum(a / d for a, d in zip(bound_alphas, spacings)),
                bound_alphas)
    dt_phys = cfg.cfl / sum(r / d for r, d in zip(spect, spacings))
    omega1 = field.basis.tables.omega_hat_1
    dt_pp = omega1 / sum(a / d for a, d in zip(bound_alphas, spacings))
    return min(dt_phys, dt_pp), bound_alphas


def _fv_dt(grid, problem):
    cfg = problem.config
    dt, alphas = max_dt(grid, problem.eos, cfg.cfl, cfg.bound)
    if cfg.bound != BOUND_STANDARD:
        # Cap with the physical wave-speed CFL; the positivity bound can sit
        # below the spectral radius in smooth low-beta data.
        dt_phys, _ = max_dt(grid, problem.eos, cfg.cfl, BOUND_STANDARD)
        dt = min(dt, dt_phys)
    return dt, alphas


def _min_pressure(avg, eos):
    with np.errstate(divide="ignore", invalid="ignore"):
        en = _ienergy_raw(avg)
        p = eos.pressure(avg[..., RHO], en / avg[..., RHO])
    return float(np.nanmin(p))


def evolve(state_obj, problem: Problem, tend, on_step=None, max_steps=None):
    """Advance a grid or DG field to tend; returns (state_obj, RunState)."""
    cfg = problem.config
    eos = problem.eos
    rs = RunState()
    is_dg = isinstance(state_obj, DgField)
    while rs.t < tend * (1.0 - 1e-14) and tend > 0.0:
        if max_steps is not None and rs.step >= max_steps:
            break
        try:
            if is_dg:
                dt, alphas = _dg_dt(state_obj, problem)
                dt = min(dt, tend - rs.t)
                div_before = (_avg_div_sup(state_obj)
                              if problem.dim >= 2 else 0.0)
                state_obj = ssp_rk3(
                    lambda u, dtt: _dg_stage(u, problem, dtt, alphas),
                    state_obj, dt, combine=combine_fields)
                avg = state_obj.cell_averages
            else:
                dt, alphas = _fv_dt(state_obj, problem)
                dt = min(dt, tend - rs.t)
                div_before = (divergence_sup(state_obj)
                              if problem.dim >= 2 else 0.0)
                state_obj = lf_step(state_obj, eos, dt, alphas)
                avg = state_obj.interior
                if not np.all(is_admissible(avg, DEFAULT_TOL)):
                    bad = np.argwhere(~is_admissible(avg, DEFAULT_TOL))[0]
                    raise _StageFailure(averages=np.array(avg),
                                        div_before=None, dt=dt,
                                        message="inadmissible cell average at "
                                                f"{tuple(int(v) for v in bad)}")
        except (_StageFailure, InadmissibleStateError,
                NumericalBlowupError, MhdDomainError) as exc:
            rs.status = EXIT_INADMISSIBLE
            rs.failure = _failure_payload(exc, problem, rs)
            break
        rs.t += dt
        rs.step += 1
        div_after = (_avg_div_sup(state_obj) if is_dg and
                     problem.dim >= 2 else
                     (divergence_sup(state_obj) if not is_dg and
                      problem.dim >= 2 else 0.0))
        row = {
            "step": rs.step, "t": rs.t, "dt": dt,
            "alphas": tuple(float(a) for a in alphas),
            "min_rho": float(np.min(avg[..., RHO])),
            "min_p": _min_pressure(avg, eos),
            "div_before": float(div_before), "div_after": float(div_after),
        }
        rs.history.append(row)
        if on_step is not None:
            on_step(state_obj, rs, row)
    return state_obj, rs


def _avg_grid(field: DgField) -> CartesianGrid:
    return CartesianGrid.from_interior(field.geom, field.rules,
                                       np.array(field.cell_averages))


def _avg_div_sup(field: DgField) -> float:
    """Sup-norm of the centered-difference divergence of the cell averages,
    straight from the (ghost-filled) padded coefficient array."""
    field.fill_ghosts()
    g = field.geom.ghost
    counts = field.geom.counts
    avg = field.coef[..., 0]
    out = None
    for ax in range(field.dim):
        comp = 4 + ax  # BX slot offset
        fwd = [slice(g, g + n) for n in counts]
        bwd = [slice(g, g + n) for n in counts]
        fwd[ax] = slice(g + 1, g + counts[ax] + 1)
        bwd[ax] = slice(g - 1, g + counts[ax] - 1)
        term = (avg[tuple(fwd) + (comp,)] - avg[tuple(bwd) + (comp,)]) \
            / (2.0 * field.geom.spacings[ax])
        out = term if out is None else out + term
    return float(np.max(np.abs(out)))


def _failure_payload(exc, problem, rs):
    payload = {
        "time": rs.t,
        "step": rs.step,
        "message": str(getattr(exc, "message", exc)),
        "averages": getattr(exc, "averages", None),
        "div_before": getattr(exc, "div_before", None),
        "dt": getattr(exc, "dt", None),
        "cells": [],
        "delta": None,
    }
    avg = payload["averages"]
    if avg is not None:
        bad = ~is_admissible(avg, DEFAULT_TOL)
        payload["cells"] = [tuple(int(v) for v in idx)
                            for idx in np.argwhere(bad)]
        div = payload["div_before"]
        if div is not None and payload["dt"] is not None:
            rho_ok = avg[..., RHO] > 0.0
            safe = np.array(avg)
            safe[..., RHO] = np.where(rho_ok, avg[..., RHO], 1.0)
            _, _, delta = energy_bound_diagnostic(safe, div, payload["dt"])
            payload["delta"] = np.where(rho_ok, delta, -np.inf)
    return payload


# ----------------------------------------------------------------------
# Public drivers
# ----------------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    t_final: float
    steps: int
    outdir: Path
    failure: Optional[dict]
    artifacts: list


def run(config: RunConfig) -> RunResult:
    problem = resolve_problem(config)
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    eos = problem.eos
    artifacts = []
    log_lines = [f"# run {problem.name}: scheme={config.scheme} "
                 f"order={config.order} limiter={config.limiter} "
                 f"bound={config.bound} cfl={config.cfl} "
                 f"cells={problem.geom.counts} seed={config.seed}"]

    if config.scheme == "dg":
        state = build_initial_field(problem)
        avg0 = state.cell_averages
    else:
        state = build_initial_grid(problem)
        avg0 = state.interior
    if not np.all(is_admissible(avg0, DEFAULT_TOL)):
        bad = np.argwhere(~is_admissible(avg0, DEFAULT_TOL))[0]
        _write_log(outdir / "run.log",
                   log_lines + [f"FAIL initial data inadmissible at "
                                f"{tuple(int(v) for v in bad)}"])
        return RunResult(EXIT_INADMISSIBLE, 0.0, 0, outdir,
                         {"time": 0.0, "cells": [tuple(int(v) for v in bad)],
                          "message": "initial data inadmissible",
                          "delta": None, "averages": None,
                          "div_before": None, "dt": None},
                         artifacts)

    snapshots = []

    def on_step(obj, rs, row):
        log_lines.append(
            "step={step} t={t:.8e} dt={dt:.6e} alphas={alphas} "
            "min_rho={min_rho:.6e} min_p={min_p:.6e} "
            "div=({div_before:.3e},{div_after:.3e})".format(**row))
        if config.snapshot_every and rs.step % config.snapshot_every == 0:
            snapshots.append((rs.step, rs.t,
                              obj.copy() if hasattr(obj, "copy") else obj))

    t0 = time.time()
    state, rs = evolve(state, problem, problem.tend, on_step=on_step)
    elapsed = time.time() - t0
    log_lines.append(f"# finished status={rs.status} t={rs.t:.8e} "
                     f"steps={rs.step} wall={elapsed:.2f}s")

    for stepno, t, obj in snapshots:
        artifacts += _write_state(outdir, f"snapshot_{stepno:06d}", obj,
                                  problem, t)
    final_name = "snapshot_final" if rs.status == EXIT_OK else "snapshot_last"
    artifacts += _write_state(outdir, final_name, state, problem, rs.t)

    div_rows = [(r["step"], r["t"], r["div_after"]) for r in rs.history]
    ext_rows = [(r["step"], r["t"], r["min_rho"], r["min_p"])
                for r in rs.history]
    div_csv = reports.write_history_csv(outdir / "divergence_history.csv",
                                        ["step", "t", "div_sup"], div_rows)
    ext_csv = reports.write_history_csv(outdir / "extrema_history.csv",
                                        ["step", "t", "min_rho", "min_p"],
                                        ext_rows)
    artifacts += [div_csv, ext_csv]
    if rs.history:
        artifacts.append(reports.render_history_figure(
            div_csv, ext_csv, outdir / "histories.png"))

    if rs.failure is not None:
        log_lines.append(f"FAIL t={rs.failure['time']:.8e} "
                         f"step={rs.failure['step']} "
                         f"cells={rs.failure['cells'][:8]} "
                         f"{rs.failure['message']}")
        artifacts += _write_failure(outdir, problem, rs.failure)
    _write_log(outdir / "run.log", log_lines)
    artifacts.append(outdir / "run.log")
    return RunResult(rs.status, rs.t, rs.step, outdir, rs.failure, artifacts)


def _write_log(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")


def _write_state(outdir, stem, obj, problem, t):
    made = []
    if isinstance(obj, DgField):
        grid = _avg_grid(obj)
        made.append(reports.write_binary(outdir / f"{stem}.bin", obj))
    else:
        grid = obj
        made.append(reports.write_binary(outdir / f"{stem}.bin", grid))
    csv = reports.write_snapshot_csv(
        outdir / f"{stem}.csv", grid, problem.eos, t,
        meta={"preset": problem.name, "gamma": problem.eos.gamma})
    made.append(csv)
    made.append(reports.render_snapshot_figure(csv))
    return made


def _write_failure(outdir, problem, failure):
    made = []
    avg = failure.get("averages")
    if avg is None:
        return made
    grid = CartesianGrid.from_interior(problem.geom, problem.rules, avg)
    extra = []
    if failure.get("delta") is not None:
        extra.append(("delta", failure["delta"]))
    if failure.get("div_before") is not None:
        extra.append(("div_n", failure["div_before"]))
    csv = reports.write_snapshot_csv(
        outdir / "failure_delta.csv", grid, problem.eos, failure["time"],
        dt=failure.get("dt"),
        meta={"preset": problem.name, "failing_cells": failure["cells"][:16]},
        extra=extra)
    made.append(csv)
    if failure.get("delta") is not None:
        made += list(reports.emit_plotdata(csv, "delta", outdir))
    return made


# ----------------------------------------------------------------------
# Convergence study
# ----------------------------------------------------------------------

def _exact_conserved(exact, eos, *coords):
    rho = exact.rho(*coords)
    vel = exact.velocity(*coords)
    prs = exact.pressure(*coords)
    bfd = exact.bfield(*coords)
    target = np.zeros(np.shape(rho) + (8,))
    target[..., 0] = rho
    for c in range(3):
        target[..., 1 + c] = rho * vel[..., c]
        target[..., 4 + c] = bfd[..., c]
    target[..., 7] = (rho * eos.specific_energy(rho, prs)
                      + 0.5 * rho * np.sum(vel * vel, axis=-1)
                      + 0.5 * np.sum(bfd * bfd, axis=-1))
    return target


def solution_errors(state_obj, problem: Problem, t):
    """Error norms against the exact solution at time t.

    Returns (density L1, density L2, density Linf, conserved-vector L1).
    Density is the classical table quantity; on presets whose density is
    an exact constant the density error is a parasitic second-order
    response, so the conserved-vector norm carries the scheme's order.
    """
    exact = problem.exact(t)
    eos = problem.eos
    x, w = gauss_rule(6)
    geom = state_obj.geom
    if problem.dim == 1:
        xs = geom.centers(0)[:, None] + geom.spacings[0] * x[None, :]
        target = _exact_conserved(exact, eos, xs)
        if isinstance(state_obj, DgField):
            from .dg import _eval_matrix_1d
            phi = _eval_matrix_1d(state_obj.k, x)
            vals = np.einsum("icn,nq->iqc", state_obj.interior_coef, phi)
        else:
            vals = np.broadcast_to(state_obj.interior[:, None, :],
                                   target.shape)
        diff = np.abs(vals - target)
        l1 = float((diff[..., RHO] * w).sum(-1).mean())
        l2 = float(np.sqrt(((diff[..., RHO] ** 2) * w).sum(-1).mean()))
        linf = float(diff[..., RHO].max())
        vec = float((diff.sum(-1) * w).sum(-1).mean())
        return l1, l2, linf, vec
    xs = geom.centers(0)[:, None] + geom.spacings[0] * x[None, :]
    ys = geom.centers(1)[:, None] + geom.spacings[1] * x[None, :]
    target = _exact_conserved(exact, eos, xs[:, None, :, None],
                              ys[None, :, None, :])
    if isinstance(state_obj, DgField):
        from .dg import _eval_matrix_2d
        xi, eta = np.meshgrid(x, x, indexing="ij")
        phi = _eval_matrix_2d(state_obj.k, xi.ravel(), eta.ravel())
        vals = np.einsum("ijcn,nq->ijqc",
                         state_obj.interior_coef, phi).reshape(target.shape)
    else:
        vals = np.broadcast_to(
            state_obj.interior[:, :, None, None, :], target.shape)
    diff = np.abs(vals - target)
    wq = np.outer(w, w)
    l1 = float(np.einsum("ijab,ab->ij", diff[..., RHO], wq).mean())
    l2 = float(np.sqrt(np.einsum("ijab,ab->ij", diff[..., RHO] ** 2,
                                 wq).mean()))
    linf = float(diff[..., RHO].max())
    vec = float(np.einsum("ijab,ab->ij", diff.sum(-1), wq).mean())
    return l1, l2, linf, vec


def density_errors(state_obj, problem: Problem, t):
    """(L1, L2, Linf) of the density against the exact solution at t."""
    return solution_errors(state_obj, problem, t)[:3]


def convergence(config: RunConfig, cell_list, outdir=None):
    """Error table over a refinement list; returns list of row dicts."""
    base = resolve_problem(config)
    if not base.smooth or base.exact is None:
        raise ConfigError(
            f"convergence needs a smooth preset with an exact solution; "
            f"{base.name} is not")
    rows = []
    prev = None
    for n in cell_list:
        cells = (int(n),) * base.dim
        cfg = RunConfig(**{**config.__dict__, "cells": cells})
        problem = resolve_problem(cfg)
        if config.scheme == "dg":
            state = build_initial_field(problem)
        else:
            state = build_initial_grid(problem)
        state, rs = evolve(state, problem, problem.tend)
        if rs.status != EXIT_OK:
            raise InadmissibleStateError(
                f"convergence run at N={n} failed at t={rs.t}")
        l1, l2, linf, vec = solution_errors(state, problem, problem.tend)
        row = {"n": int(n), "l1": l1, "l2": l2, "linf": linf, "vec_l1": vec,
               "order_l1": np.nan, "order_l2": np.nan, "order_linf": np.nan,
               "order_vec_l1": np.nan}
        if prev is not None:
            ratio = np.log(prev["n"] / row["n"])
            for key in ("l1", "l2", "linf", "vec_l1"):
                row[f"order_{key}"] = float(
                    np.log(row[key] / prev[key]) / ratio)
        rows.append(row)
        prev = row
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        names = ["n", "l1", "order_l1", "l2", "order_l2", "linf",
                 "order_linf", "vec_l1", "order_vec_l1"]
        table = [[r[k] for k in names] for r in rows]
        csv = reports.write_history_csv(outdir / "convergence.csv", names,
                                        table)
        reports.render_convergence_figure(
            [(r["n"], r["l1"], r["l2"], r["linf"]) for r in rows],
            outdir / "convergence.png")
        return rows, csv
    return rows, None
