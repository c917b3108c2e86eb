"""Command-line entry points.

Subcommands: run | convergence | verify | counterexample | emit-plotdata.
Exit codes: 0 success, 1 configuration error, 2 inadmissible state,
3 verification-suite failure.  PPMHD_THREADS sets the verify worker count.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bounds import BOUND_KINDS
from .counterexamples import HARNESSES
from .exceptions import ConfigError, PpmhdError
from .presets import PRESETS, LIMITER_CHAINS, RunConfig, load_config
from .reports import PLOT_KINDS, emit_plotdata
from .runner import EXIT_CONFIG, EXIT_INADMISSIBLE, EXIT_OK, \
    EXIT_SUITE_FAILURE, convergence, run
from .verify import SUITES, run_suite


def _add_run_flags(sub):
    sub.add_argument("--config", help="INI config file; flags override it")
    sub.add_argument("--preset", choices=sorted(PRESETS),
                     help="named experiment preset")
    sub.add_argument("--cells", help="cells per axis, e.g. 200 or 160,160")
    sub.add_argument("--cfl", type=float)
    sub.add_argument("--order", type=int, help="polynomial degree (dg)")
    sub.add_argument("--scheme", choices=("lf1", "dg"))
    sub.add_argument("--limiter", choices=LIMITER_CHAINS)
    sub.add_argument("--bound", choices=BOUND_KINDS)
    sub.add_argument("--tend", type=float)
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--tvb-m", type=float, dest="tvb_m")
    sub.add_argument("--no-divfree", action="store_true",
                     help="skip the locally divergence-free projection")
    sub.add_argument("--strict", action="store_true",
                     help="error out when provability hypotheses fail")
    sub.add_argument("--snapshot-every", type=int, dest="snapshot_every")


def _config_from_args(args) -> RunConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = RunConfig(preset=args.preset or "sine-1d")
    updates = {}
    for key in ("preset", "cfl", "order", "scheme", "limiter", "bound",
                "tend", "out", "seed", "tvb_m", "snapshot_every"):
        val = getattr(args, key, None)
        if val is not None:
            updates[key] = val
    if args.cells:
        updates["cells"] = tuple(int(c) for c in args.cells.split(","))
    if getattr(args, "no_divfree", False):
        updates["divfree"] = False
    if getattr(args, "strict", False):
        updates["strict"] = True
    return replace(config, **updates)


def _cmd_run(args):
    config = _config_from_args(args)
    result = run(config)
    if result.exit_code == EXIT_OK:
        print(f"run complete: t={result.t_final:.6e} steps={result.steps} "
              f"artifacts in {result.outdir}")
    else:
        fail = result.failure or {}
        cells = ", ".join(str(c) for c in fail.get("cells", [])[:6])
        print(f"run FAILED at t={fail.get('time', 0.0):.6e}: "
              f"{fail.get('message', 'inadmissible state')} "
              f"[cells {cells}]", file=sys.stderr)
    return result.exit_code


def _cmd_convergence(args):
    config = _config_from_args(args)
    cell_list = [int(c) for c in args.refine.split(",")]
    outdir = Path(config.out)
    rows, csv = convergence(config, cell_list, outdir=outdir)
    print(f"{'N':>6} {'L1':>12} {'order':>7} {'L2':>12} {'order':>7} "
          f"{'Linf':>12} {'order':>7}")
    for r in rows:
        def fmt(key):
            v = r[f"order_{key}"]
            return f"{v:7.2f}" if np.isfinite(v) else "      -"
        print(f"{r['n']:6d} {r['l1']:12.4e} {fmt('l1')} {r['l2']:12.4e} "
              f"{fmt('l2')} {r['linf']:12.4e} {fmt('linf')}")
    if csv:
        print(f"table written to {csv}")
    return EXIT_OK


def _cmd_verify(args):
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    worst = EXIT_OK
    for name in names:
        res = run_suite(name, trials=args.trials, seed=args.seed)
        status = "ok" if res.ok else "FAIL"
        print(f"{name:24s} trials={res.trials:<7d} failures={res.failures} "
              f"[{status}] {res.detail}")
        if not res.ok:
            worst = EXIT_SUITE_FAILURE
            print(f"  reproduce with --seed {res.seed}", file=sys.stderr)
            for ex in res.examples[:2]:
                print(f"  example: {ex}", file=sys.stderr)
    return worst


def _cmd_counterexample(args):
    harness = HARNESSES[args.name]
    kwargs = {}
    if args.name == "lf-splitting":
        kwargs = {"chi": args.chi, "p": args.p if args.p is not None else 1e-6}
    elif args.name == "glf-alpha-a1":
        kwargs = {"sweep_trials": args.trials or 0, "seed": args.seed}
    elif args.name == "1d-standard-viscosity":
        if args.p is not None:
            kwargs["p"] = args.p
        if args.cfl is not None:
            kwargs["cfls"] = (args.cfl,)
    else:
        kwargs = {"chi": args.chi, "eps": args.eps}
        if args.p is not None:
            kwargs["p"] = args.p
        if args.cfl is not None:
            kwargs["cfl"] = args.cfl
    report = harness(**kwargs)
    _print_report(report)
    return EXIT_OK


def _print_report(report, indent=""):
    for key, val in report.items():
        if isinstance(val, dict):
            print(f"{indent}{key}:")
            _print_report(val, indent + "  ")
        elif isinstance(val, (list, tuple)) and val and isinstance(
                val[0], dict):
            print(f"{indent}{key}:")
            for row in val:
                print(f"{indent}  " + "  ".join(
                    f"{k}={_fmt(v)}" for k, v in row.items()))
        else:
            print(f"{indent}{key}: {_fmt(val)}")


def _fmt(val):
    if isinstance(val, float):
        return f"{val:.8g}"
    if isinstance(val, np.ndarray):
        return np.array2string(val, precision=6, separator=",")
    if isinstance(val, tuple):
        return "(" + ", ".join(_fmt(v) for v in val) + ")"
    return str(val)


def _cmd_emit_plotdata(args):
    csv, png = emit_plotdata(args.snapshot, args.kind, outdir=args.out,
                             axis=args.axis, index=args.index)
    print(f"wrote {csv} and {png}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ppmhd",
        description="Positivity-preserving LF finite-volume/DG laboratory "
                    "for ideal MHD on uniform Cartesian meshes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    _add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_conv = sub.add_parser("convergence", help="refinement error table")
    _add_run_flags(p_conv)
    p_conv.add_argument("--refine", default="40,80,160,320,640",
                        help="comma list of cell counts per direction")
    p_conv.set_defaults(func=_cmd_convergence)

    p_ver = sub.add_parser("verify", help="randomized verification suites")
    p_ver.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_ver.add_argument("--trials", type=int, default=None)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=_cmd_verify)

    p_cex = sub.add_parser("counterexample",
                           help="reproduce a non-positivity probe")
    p_cex.add_argument("name", choices=sorted(HARNESSES))
    p_cex.add_argument("--p", type=float, default=None)
    p_cex.add_argument("--chi", type=float, default=1.0)
    p_cex.add_argument("--eps", type=float, default=1e-3)
    p_cex.add_argument("--cfl", type=float, default=None)
    p_cex.add_argument("--trials", type=int, default=None)
    p_cex.add_argument("--seed", type=int, default=0)
    p_cex.set_defaults(func=_cmd_counterexample)

    p_plot = sub.add_parser("emit-plotdata",
                            help="derived CSV + figure from a snapshot")
    p_plot.add_argument("snapshot", help="snapshot CSV path")
    p_plot.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p_plot.add_argument("--out", default=None)
    p_plot.add_argument("--axis", choices=("x", "y"), default="y")
    p_plot.add_argument("--index", type=int, default=None)
    p_plot.set_defaults(func=_cmd_emit_plotdata)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PpmhdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE


if __name__ == "__main__":
    sys.exit(main())
