from pathlib import Path

import numpy as np
import pytest

from ppmhd.cli import main
from ppmhd.dg import DgField
from ppmhd.exceptions import ConfigError
from ppmhd.fv import init_cellavg_2d
from ppmhd.presets import PRESETS, RunConfig, get_preset, load_config
from ppmhd.randstates import random_grid_2d
from ppmhd.reports import (
    emit_plotdata,
    read_binary,
    read_snapshot_csv,
    write_binary,
    write_snapshot_csv,
)
from ppmhd.runner import (
    EXIT_CONFIG,
    EXIT_INADMISSIBLE,
    EXIT_OK,
    build_initial_field,
    build_initial_grid,
    convergence,
    resolve_problem,
    run,
)
from ppmhd.states import is_admissible


class TestPresetCatalog:
    def test_all_names_resolve(self):
        expected = {"sine-1d", "sine-2d", "vortex-2d", "vacuum-tube-1d",
                    "leblanc-b-1d", "blast-2d", "jet-2d", "jet-2d-weak",
                    "jet-2d-strong", "counterexample-1d", "counterexample-2d",
                    "orszag-tang-2d", "rotor-2d"}
        assert expected <= set(PRESETS)
        with pytest.raises(ConfigError):
            get_preset("not-a-preset")

    @pytest.mark.parametrize("name", sorted(
        n for n in PRESETS if n != "jet-2d"))
    def test_initial_grids_admissible(self, name):
        pre = get_preset(name)
        cells = tuple(min(c, 48) for c in pre.default_cells)
        cfg = RunConfig(preset=name, cells=cells, scheme="lf1")
        problem = resolve_problem(cfg)
        grid = build_initial_grid(problem)
        assert np.all(is_admissible(grid.interior)), name

    def test_dg_initialization_admissible_after_chain(self):
        cfg = RunConfig(preset="vacuum-tube-1d", cells=(64,), order=2,
                        limiter="pp")
        problem = resolve_problem(cfg)
        field = build_initial_field(problem)
        assert np.all(is_admissible(field.cell_averages))

    def test_vortex_center_pressure_scale(self):
        # the tuned strength leaves ~5e-12 of pressure at the vortex center
        pre = get_preset("vortex-2d")
        p0 = float(pre.fields.pressure(np.array(0.0), np.array(0.0)))
        assert 0 < p0 < 1e-11


class TestConfigParsing:
    def test_roundtrip(self, tmp_path):
        cfg_file = tmp_path / "run.ini"
        cfg_file.write_text("""
[run]
preset = vacuum-tube-1d
scheme = dg
order = 2
limiter = pp
bound = alpha-sqrt
cfl = 0.2
cells = 64
tend = 0.01
seed = 7
out = somewhere
divfree = false
""")
        cfg = load_config(cfg_file)
        assert cfg.preset == "vacuum-tube-1d"
        assert cfg.order == 2
        assert cfg.cfl == 0.2
        assert cfg.cells == (64,)
        assert cfg.seed == 7
        assert cfg.divfree is False

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_missing_run_section(self, tmp_path):
        f = tmp_path / "bad.ini"
        f.write_text("[other]\nx = 1\n")
        with pytest.raises(ConfigError):
            load_config(f)

    def test_bad_value_reports_location(self, tmp_path):
        f = tmp_path / "bad.ini"
        f.write_text("[run]\npreset = sine-1d\ncfl = banana\n")
        with pytest.raises(ConfigError) as err:
            load_config(f)
        assert "bad.ini" in str(err.value)

    def test_validation_rules(self):
        with pytest.raises(ConfigError):
            RunConfig(preset="sine-1d", cfl=0.0)
        with pytest.raises(ConfigError):
            RunConfig(preset="sine-1d", cells=(2,))
        with pytest.raises(ConfigError):
            RunConfig(preset="sine-1d", scheme="weird")
        with pytest.raises(ConfigError):
            RunConfig()

    def test_inline_problem(self, tmp_path):
        f = tmp_path / "inline.ini"
        f.write_text("""
[run]
scheme = lf1
cells = 16
tend = 0.01
[problem]
dim = 1
gamma = 1.4
domain_x = 0, 6.283185307179586
boundary = periodic
rho = 1 + 0.5*sin(x)
vx = 1
p = 1
bx = 0.1
""")
        cfg = load_config(f)
        problem = resolve_problem(cfg)
        grid = build_initial_grid(problem)
        assert np.all(is_admissible(grid.interior))
        assert grid.interior[:, 0].max() > 1.2


class TestRunArtifacts:
    def test_small_run_produces_artifacts(self, tmp_path):
        cfg = RunConfig(preset="sine-1d", cells=(16,), order=1, limiter="pp",
                        cfl=0.3, tend=0.02, out=str(tmp_path / "out"),
                        snapshot_every=1)
        res = run(cfg)
        assert res.exit_code == EXIT_OK
        names = {p.name for p in Path(res.outdir).iterdir()}
        assert "snapshot_final.csv" in names
        assert "snapshot_final.bin" in names
        assert "snapshot_final.png" in names
        assert "divergence_history.csv" in names
        assert "extrema_history.csv" in names
        assert "histories.png" in names
        assert "run.log" in names
        assert any(n.startswith("snapshot_000001") for n in names)
        log = (res.outdir / "run.log").read_text()
        assert "min_rho" in log and "alphas" in log

    def test_deterministic_replay(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            cfg = RunConfig(preset="sine-1d", cells=(16,), order=2,
                            limiter="pp", cfl=0.2, tend=0.02,
                            out=str(tmp_path / sub), seed=3)
            res = run(cfg)
            outs.append((res.outdir / "snapshot_final.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_failure_exit_code_and_report(self, tmp_path):
        cfg = RunConfig(preset="vacuum-tube-1d", cells=(64,), order=2,
                        limiter="none", cfl=0.15, tend=0.05,
                        out=str(tmp_path / "fail"))
        res = run(cfg)
        assert res.exit_code == EXIT_INADMISSIBLE
        assert res.failure is not None
        log = (res.outdir / "run.log").read_text()
        assert "FAIL" in log

    def test_lf1_2d_run(self, tmp_path):
        cfg = RunConfig(preset="sine-2d", cells=(12, 12), scheme="lf1",
                        cfl=0.5, tend=0.05, out=str(tmp_path / "fv"))
        res = run(cfg)
        assert res.exit_code == EXIT_OK
        meta, data = read_snapshot_csv(res.outdir / "snapshot_final.csv")
        assert {"i", "j", "x", "y", "rho", "p", "ienergy", "ddf"} <= set(
            data.dtype.names)


class TestBinaryDumps:
    def test_fv_round_trip(self, rng, tmp_path, eos):
        grid = random_grid_2d(rng, (6, 5))
        path = tmp_path / "dump.bin"
        write_binary(path, grid)
        kind, header, data = read_binary(path)
        assert kind == "fv"
        assert header["counts"] == (6, 5)
        np.testing.assert_array_equal(data, grid.interior)
        assert path.read_bytes()[:6] == b"PPMHD1"

    def test_dg_round_trip(self, rng, tmp_path, eos):
        grid = random_grid_2d(rng, (5, 4))
        fld = DgField.from_cell_averages(grid.geom, grid.rules,
                                         grid.interior, 2)
        fld.interior_coef[..., 1:] = rng.normal(
            size=fld.interior_coef[..., 1:].shape)
        path = tmp_path / "dump_dg.bin"
        write_binary(path, fld)
        kind, header, data = read_binary(path)
        assert kind == "dg"
        assert header["k"] == 2 and header["ncoef"] == 6
        np.testing.assert_array_equal(data, fld.interior_coef)
        assert path.read_bytes()[:9] == b"PPMHD-DG1"


class TestEmitPlotdata:
    @pytest.fixture()
    def snapshot(self, rng, tmp_path, eos):
        grid = random_grid_2d(rng, (8, 8))
        path = tmp_path / "snap.csv"
        write_snapshot_csv(path, grid, eos, t=0.1, dt=1e-3)
        return path

    def test_slice(self, snapshot, tmp_path):
        csv, png = emit_plotdata(snapshot, "slice", outdir=tmp_path)
        assert csv.exists() and png.exists()
        head = csv.read_text().splitlines()
        assert head[0].startswith("#")
        assert "columns:" in head[1] or "columns:" in head[0]

    def test_schlieren(self, snapshot, tmp_path):
        csv, png = emit_plotdata(snapshot, "schlieren", outdir=tmp_path)
        data = np.genfromtxt(csv, delimiter=",", names=True, skip_header=2)
        assert np.all(np.isfinite(data["schlieren"]))

    def test_delta_requires_failure_snapshot(self, snapshot, tmp_path):
        with pytest.raises(ConfigError):
            emit_plotdata(snapshot, "delta", outdir=tmp_path)

    def test_delta_from_failure_snapshot(self, rng, tmp_path, eos):
        grid = random_grid_2d(rng, (6, 6))
        delta = rng.uniform(-2, 1, (6, 6))
        path = tmp_path / "failure.csv"
        write_snapshot_csv(path, grid, eos, t=0.1, dt=1e-4,
                           extra=[("delta", delta)])
        csv, png = emit_plotdata(path, "delta", outdir=tmp_path)
        data = np.genfromtxt(csv, delimiter=",", names=True, skip_header=2)
        np.testing.assert_allclose(np.sort(data["delta"]),
                                   np.sort(delta.ravel()), rtol=1e-6)

    def test_unknown_kind(self, snapshot):
        with pytest.raises(ConfigError):
            emit_plotdata(snapshot, "contour")


class TestConvergenceDriver:
    def test_first_order_scheme_is_first_order(self):
        cfg = RunConfig(preset="sine-1d", scheme="dg", order=0,
                        limiter="none", cfl=0.4)
        rows, _ = convergence(cfg, [32, 64, 128])
        assert rows[-1]["order_l1"] == pytest.approx(1.0, abs=0.25)

    def test_non_smooth_preset_refused(self):
        cfg = RunConfig(preset="vacuum-tube-1d")
        with pytest.raises(ConfigError):
            convergence(cfg, [32, 64])

    def test_table_artifacts(self, tmp_path):
        cfg = RunConfig(preset="sine-1d", scheme="dg", order=1, limiter="pp",
                        cfl=0.3)
        rows, csv = convergence(cfg, [16, 32], outdir=tmp_path)
        assert csv.exists()
        assert (tmp_path / "convergence.png").exists()
        assert len(rows) == 2


class TestCliInterface:
    def test_run_exit_zero(self, tmp_path):
        code = main(["run", "--preset", "sine-1d", "--cells", "16",
                     "--order", "1", "--cfl", "0.3", "--tend", "0.01",
                     "--out", str(tmp_path / "cli_out")])
        assert code == EXIT_OK

    def test_run_failure_exit_two(self, tmp_path):
        code = main(["run", "--preset", "vacuum-tube-1d", "--cells", "64",
                     "--order", "2", "--limiter", "none", "--cfl", "0.15",
                     "--tend", "0.05", "--out", str(tmp_path / "cli_fail")])
        assert code == EXIT_INADMISSIBLE

    def test_config_error_exit_one(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[run]\npreset = sine-1d\ncfl = 2.5\n")
        code = main(["run", "--config", str(bad)])
        assert code == EXIT_CONFIG

    def test_counterexample_commands(self, capsys):
        assert main(["counterexample", "lf-splitting", "--chi", "2",
                     "--p", "1e-6"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "closed_form" in out
        assert main(["counterexample", "glf-alpha-a1"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ienergy_at_a1" in out

    def test_counterexample_sweep(self, capsys):
        assert main(["counterexample", "1d-standard-viscosity",
                     "--p", "1e-5"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "zero_pressure_limit" in out
        assert main(["counterexample", "2d-any-viscosity", "--chi", "2",
                     "--p", "1e-8"]) == EXIT_OK

    def test_verify_command_small(self, capsys):
        code = main(["verify", "prop27", "--trials", "500", "--seed", "1"])
        assert code == EXIT_OK
        assert "failures=0" in capsys.readouterr().out

    def test_verify_failure_exit_three(self, monkeypatch, capsys):
        from ppmhd import verify as vmod
        from ppmhd.runner import EXIT_SUITE_FAILURE

        def broken(trials, seed):
            return vmod.SuiteResult(name="prop27", trials=trials, failures=3,
                                    seed=seed)

        monkeypatch.setitem(vmod.SUITES, "prop27", broken)
        code = main(["verify", "prop27", "--trials", "10"])
        assert code == EXIT_SUITE_FAILURE

    def test_emit_plotdata_command(self, rng, tmp_path, eos):
        grid = random_grid_2d(rng, (6, 6))
        path = tmp_path / "snap.csv"
        write_snapshot_csv(path, grid, eos, t=0.0)
        code = main(["emit-plotdata", str(path), "--kind", "schlieren",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK

    def test_convergence_command(self, tmp_path, capsys):
        code = main(["convergence", "--preset", "sine-1d", "--order", "1",
                     "--cfl", "0.3", "--refine", "16,32",
                     "--out", str(tmp_path / "conv")])
        assert code == EXIT_OK
        assert "order" in capsys.readouterr().out


class TestThreadedVerify:
    def test_worker_partition_merges_counts(self, monkeypatch):
        from ppmhd.verify import run_suite

        monkeypatch.setenv("PPMHD_THREADS", "2")
        res = run_suite("prop27", trials=400, seed=5)
        assert res.trials == 400
        assert res.failures == 0


class TestAlternativeBoundKinds:
    @pytest.mark.parametrize("bound", ["alpha-rho", "alpha-tilde", "standard"])
    def test_runs_complete_with_each_bound(self, bound, tmp_path):
        cfg = RunConfig(preset="sine-1d", cells=(16,), order=1, limiter="pp",
                        bound=bound, cfl=0.2, tend=0.01,
                        out=str(tmp_path / bound))
        res = run(cfg)
        assert res.exit_code == EXIT_OK

    def test_2d_run_with_rho_bound(self, tmp_path):
        cfg = RunConfig(preset="sine-2d", cells=(8, 8), order=2, limiter="pp",
                        bound="alpha-rho", cfl=0.15, tend=0.005,
                        out=str(tmp_path / "rho2d"))
        res = run(cfg)
        assert res.exit_code == EXIT_OK
