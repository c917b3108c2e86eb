import numpy as np
import pytest

from ppmhd.bounds import BOUND_ALPHA_SQRT, BOUND_STANDARD, strict_exceed
from ppmhd.exceptions import ConfigError, InadmissibleStateError, MhdDomainError
from ppmhd.fv import (
    axis_alpha,
    ddf_residual_2d,
    ddf_residual_3d,
    divergence_sup,
    init_cellavg_1d,
    init_cellavg_2d,
    init_cellavg_3d,
    lf_step,
    lf_step_1d,
    lf_step_2d,
    lf_step_3d,
    max_dt,
    step_report,
)
from ppmhd.grid import (
    OUTFLOW,
    PERIODIC,
    CartesianGrid,
    GridGeometry,
    InflowRegion,
    fill_ghosts,
)
from ppmhd.presets import counterexample_1d_grid, counterexample_2d_grid, stack3
from ppmhd.randstates import random_grid_1d, random_grid_2d, random_grid_3d
from ppmhd.states import BX, _ienergy_raw, is_admissible, to_conserved


def uniform_grid(dim, state, n=8, rules=None):
    geom = GridGeometry(counts=(n,) * dim, spacings=(1.0 / n,) * dim,
                        origin=(0.0,) * dim)
    interior = np.tile(state, geom.counts + (1,))
    rules = rules or tuple(PERIODIC for _ in range(dim))
    return CartesianGrid.from_interior(geom, rules, interior)


class TestGhostFilling:
    def test_periodic_wraparound(self, rng, eos):
        grid = random_grid_1d(rng, 8)
        grid.fill_ghosts()
        np.testing.assert_array_equal(grid.u[0], grid.u[8])
        np.testing.assert_array_equal(grid.u[-1], grid.u[1])

    def test_outflow_copies_boundary_cell(self, rng):
        grid = random_grid_1d(rng, 8)
        grid = CartesianGrid.from_interior(grid.geom, ((OUTFLOW, OUTFLOW),),
                                           grid.interior)
        np.testing.assert_array_equal(grid.u[0], grid.u[1])
        np.testing.assert_array_equal(grid.u[-1], grid.u[-2])

    def test_nozzle_holds_declared_state(self, eos):
        state = to_conserved(np.array([1.4, 0, 800 * 1.4 / 1.4, 0, 1.0,
                                       0, np.sqrt(20), 0]), eos)
        state = np.array([1.4, 0, 1.4 * 800, 0, 0, np.sqrt(20), 0,
                          1.0 / 0.4 + 0.5 * 1.4 * 800 ** 2 + 10.0])
        nozzle = InflowRegion(state=state, mask_fn=lambda x: np.abs(x) < 0.25)
        geom = GridGeometry(counts=(8, 6), spacings=(0.125, 0.25),
                            origin=(-0.5, 0.0))
        interior = np.tile(np.array([0.14, 0, 0, 0, 0, np.sqrt(20), 0, 13.0]),
                           (8, 6, 1))
        grid = CartesianGrid.from_interior(
            geom, ((OUTFLOW, OUTFLOW), (nozzle, OUTFLOW)), interior)
        xs = geom.centers(0, with_ghosts=True)
        inside = np.abs(xs) < 0.25
        np.testing.assert_array_equal(
            grid.u[inside, 0], np.tile(state, (int(inside.sum()), 1)))
        # outside the nozzle the low-y ghost copies the boundary cell
        np.testing.assert_array_equal(grid.u[~inside, 0],
                                      grid.u[~inside, 1])
        fill_ghosts(grid)  # idempotent alias

    def test_unknown_rule_rejected(self, rng):
        grid = random_grid_1d(rng, 8)
        with pytest.raises(ConfigError):
            CartesianGrid.from_interior(grid.geom, ("weird",), grid.interior)


class TestMaxDt:
    def test_uniform_rest_gas(self, eos):
        # alpha for equal states is the reduced sound speed; dt = cfl dx/alpha
        state = to_conserved(np.array([1.0, 0, 0, 0, 1.0, 0, 0, 0]), eos)
        grid = uniform_grid(1, state, n=8)
        dt, alphas = max_dt(grid, eos, 1.0)
        expected_alpha = float(strict_exceed(np.sqrt(0.2)))
        assert alphas[0] == pytest.approx(expected_alpha, rel=1e-12)
        assert dt == pytest.approx(grid.geom.spacings[0] / expected_alpha)

    def test_zero_cfl_rejected(self, rng, eos):
        grid = random_grid_1d(rng, 8)
        with pytest.raises(MhdDomainError):
            max_dt(grid, eos, 0.0)

    def test_2d_sum_form(self, eos):
        state = to_conserved(np.array([1.0, 0, 0, 0, 1.0, 0, 0, 0]), eos)
        grid = uniform_grid(2, state, n=6)
        dt, alphas = max_dt(grid, eos, 0.8)
        assert alphas[0] == pytest.approx(alphas[1], rel=1e-12)
        dx = grid.geom.spacings[0]
        assert dt == pytest.approx(0.8 * dx / (2 * alphas[0]), rel=1e-12)

    def test_inadmissible_cell_named(self, rng, eos):
        grid = random_grid_1d(rng, 8)
        grid.interior[3, 7] = 0.0
        with pytest.raises(InadmissibleStateError) as err:
            max_dt(grid, eos, 0.5)
        assert err.value.cell == (3,)


class TestLfSteps:
    def test_constant_state_fixed_point(self, eos):
        state = to_conserved(np.array([1.0, 0.3, -0.2, 0.1, 0.5, 1.0, 0, 2.0]),
                             eos)
        for dim, step in ((1, lf_step_1d), (2, lf_step_2d), (3, lf_step_3d)):
            grid = uniform_grid(dim, state, n=6)
            dt, alphas = max_dt(grid, eos, 0.9)
            out = step(grid, eos, dt, *alphas)
            np.testing.assert_allclose(out.interior, grid.interior, rtol=1e-13)

    def test_b1_constant_preserved_1d(self, rng, eos):
        grid = random_grid_1d(rng, 16)
        b1 = np.array(grid.interior[:, BX])
        dt, alphas = max_dt(grid, eos, 1.0)
        out = lf_step_1d(grid, eos, dt, alphas[0])
        assert np.max(np.abs(out.interior[:, BX] - b1)) <= 1e-14 * max(
            1.0, np.max(np.abs(b1)))

    def test_z_uniform_3d_matches_2d(self, rng, eos):
        g2 = random_grid_2d(rng, (6, 6))
        interior3 = np.repeat(g2.interior[:, :, None, :], 5, axis=2)
        geom3 = GridGeometry(counts=(6, 6, 5),
                             spacings=g2.geom.spacings + (0.2,),
                             origin=(0.0, 0.0, 0.0))
        g3 = CartesianGrid.from_interior(geom3, (PERIODIC,) * 3, interior3)
        dt, alphas = max_dt(g2, eos, 0.5)
        out2 = lf_step_2d(g2, eos, dt, *alphas)
        # z-fluxes cancel for z-uniform data with any alpha3
        out3 = lf_step_3d(g3, eos, dt, alphas[0], alphas[1], 10.0)
        np.testing.assert_allclose(out3.interior[:, :, 2],
                                   out2.interior, rtol=1e-12, atol=1e-13)

    def test_conservation_periodic(self, rng, eos):
        grid = random_grid_2d(rng, (8, 8))
        totals = grid.interior.sum(axis=(0, 1))
        dt, alphas = max_dt(grid, eos, 1.0)
        out = lf_step_2d(grid, eos, dt, *alphas)
        np.testing.assert_allclose(out.interior.sum(axis=(0, 1)), totals,
                                   rtol=1e-12, atol=1e-12)

    def test_step_report(self, rng, eos):
        grid = random_grid_2d(rng, (6, 6))
        dt, alphas = max_dt(grid, eos, 0.5)
        before = divergence_sup(grid)
        out = lf_step(grid, eos, dt, alphas)
        rep = step_report(out, eos, dt, alphas, before)
        assert rep.admissible
        assert rep.min_rho == pytest.approx(float(out.interior[..., 0].min()))
        assert rep.div_sup_before == pytest.approx(before)


class TestStandardViscosityCounterexample1D:
    """One step on the three-state data with the plain max-spectral-radius
    viscosity loses pressure positivity at every CFL number."""

    def test_alpha_matches_closed_form(self, eos):
        p = 1e-5
        grid = counterexample_1d_grid((5,), {"p": p})
        alpha = axis_alpha(grid, eos, 1, BOUND_STANDARD)
        expected = (np.sqrt(5) / 4) * np.sqrt(
            7 * p + 1e3 + np.sqrt(49 * p ** 2 + 1e6))
        assert alpha == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("cfl", [0.1, 0.5, 0.9])
    def test_negative_pressure_each_cfl(self, eos, cfl):
        grid = counterexample_1d_grid((5,), {"p": 1e-5})
        alpha = axis_alpha(grid, eos, 1, BOUND_STANDARD)
        dt = cfl * grid.geom.spacings[0] / alpha
        out = lf_step_1d(grid, eos, dt, alpha)
        mid = out.interior[grid.geom.counts[0] // 2]
        assert _ienergy_raw(mid) < 0

    def test_limit_value_at_unit_cfl(self, eos):
        grid = counterexample_1d_grid((5,), {"p": 1e-8})
        alpha = axis_alpha(grid, eos, 1, BOUND_STANDARD)
        dt = grid.geom.spacings[0] / alpha
        out = lf_step_1d(grid, eos, dt, alpha)
        mid = out.interior[grid.geom.counts[0] // 2]
        assert _ienergy_raw(mid) == pytest.approx(-0.0675, abs=1e-3)

    @pytest.mark.parametrize("cfl", [0.1, 0.3, 0.5, 0.7, 0.9, 1.0])
    def test_pair_bound_recovers_positivity(self, eos, cfl):
        grid = counterexample_1d_grid((5,), {"p": 1e-5})
        alpha = axis_alpha(grid, eos, 1, BOUND_ALPHA_SQRT)
        dt = cfl * grid.geom.spacings[0] / alpha
        out = lf_step_1d(grid, eos, dt, alpha)
        assert np.all(is_admissible(out.interior))


class TestAnyViscosityCounterexample2D:
    def test_negative_pressure_for_every_multiplier(self, eos):
        from ppmhd.bounds import spectral_radius

        for chi in (1.0, 2.0, 50.0):
            grid = counterexample_2d_grid((5, 5),
                                          {"p": 1e-8, "eps": 1e-3, "chi": chi})
            a1 = chi * float(np.max(spectral_radius(grid.u, eos, 1)))
            a2 = chi * float(np.max(spectral_radius(grid.u, eos, 2)))
            dt = 1.0 / (a1 / 1.0 + a2 / 1.0)
            out = lf_step_2d(grid, eos, dt, a1, a2)
            ci, cj = (n // 2 for n in grid.geom.counts)
            assert _ienergy_raw(out.interior[ci, cj]) < 0

    def test_limit_formula(self, eos):
        from ppmhd.bounds import spectral_radius

        chi, eps, p = 1.0, 1e-3, 1e-10
        grid = counterexample_2d_grid((5, 5),
                                      {"p": p, "eps": eps, "chi": chi})
        a1 = chi * float(np.max(spectral_radius(grid.u, eos, 1)))
        a2 = chi * float(np.max(spectral_radius(grid.u, eos, 2)))
        dt = 1.0 / (a1 + a2)
        out = lf_step_2d(grid, eos, dt, a1, a2)
        ci, cj = (n // 2 for n in grid.geom.counts)
        limit = -eps * (2 + eps) * (8 * chi + eps - 4 * eps * chi ** 2) / (
            32 * chi ** 2 * (2 + eps + (1 + eps)))
        assert _ienergy_raw(out.interior[ci, cj]) == pytest.approx(
            limit, rel=0.05)

    def test_ddf_residual_of_probe_data(self, eos):
        grid = counterexample_2d_grid((5, 5), {"p": 1e-8, "eps": 1e-3})
        ci, cj = (n // 2 for n in grid.geom.counts)
        assert ddf_residual_2d(grid, ci, cj) == pytest.approx(1e-3 / 2.0,
                                                              rel=1e-10)


def test_piecewise_constant_b1_defeats_1d_scheme(eos):
    """Regression: the 1D restriction of the 2D probe (jumping B1) loses
    positivity even with the pairwise viscosity bound at unit CFL."""
    p, eps, chi = 1e-8, 1e-3, 1.0
    gamma = 1.4
    other = np.array([1, (4 * chi + eps) / (4 * chi), 0, 0, 1 + eps / 2, 0, 0,
                      p / (gamma - 1) + (4 * chi + eps) ** 2 / (32 * chi ** 2)
                      + (eps + 2) ** 2 / 8])
    west = np.array([1, 1, 0, 0, 1, 0, 0, p / (gamma - 1) + 1])
    east = np.array([1, 1, 0, 0, 1 + eps, 0, 0,
                     p / (gamma - 1) + (1 + (1 + eps) ** 2) / 2])
    interior = np.tile(other, (5, 1))
    interior[1] = west
    interior[3] = east
    geom = GridGeometry(counts=(5,), spacings=(1.0,), origin=(0.0,))
    grid = CartesianGrid.from_interior(geom, ((OUTFLOW, OUTFLOW),), interior)
    alpha = axis_alpha(grid, eos, 1, BOUND_ALPHA_SQRT)
    out = lf_step_1d(grid, eos, 1.0 / alpha, alpha)
    en = _ienergy_raw(out.interior)
    assert en.min() < 0
    # frozen from the search that produced this instance
    assert en.min() == pytest.approx(-2.4982e-4, rel=1e-3)
    assert int(np.argmin(en)) == 2


class TestDdfOperators:
    def test_uniform_field_zero(self, eos):
        state = to_conserved(np.array([1.0, 0, 0, 0, 0.7, -0.3, 0.2, 1.0]), eos)
        grid = uniform_grid(2, state, n=6)
        assert divergence_sup(grid) == 0.0

    def test_linear_field_exact_cancellation(self, rng):
        # B = (y, x, 0) sampled as exact cell averages (linear => centroid)
        geom = GridGeometry(counts=(8, 8), spacings=(0.25, 0.125),
                            origin=(0.0, 0.0))
        xs = geom.centers(0)
        ys = geom.centers(1)
        interior = np.zeros((8, 8, 8))
        interior[..., 0] = 1.0
        interior[..., 4] = ys[None, :]
        interior[..., 5] = xs[:, None]
        interior[..., 7] = 5.0
        grid = CartesianGrid.from_interior(geom, (PERIODIC, PERIODIC),
                                           interior)
        inner = np.abs(
            [[ddf_residual_2d(grid, i, j) for j in range(1, 7)]
             for i in range(1, 7)])
        assert inner.max() <= 1e-13

    def test_single_bump_neighbors(self):
        geom = GridGeometry(counts=(9,), spacings=(0.5,), origin=(0.0,))
        interior = np.zeros((9, 8))
        interior[:, 0] = 1.0
        interior[:, 7] = 5.0
        h = 0.75
        interior[4, BX] += h
        grid = CartesianGrid.from_interior(geom, ((OUTFLOW, OUTFLOW),),
                                           interior)
        # 1D residual field is the centered difference of B1
        from ppmhd.fv import ddf_residual_field

        res = ddf_residual_field(grid)
        assert res[3] == pytest.approx(h / (2 * 0.5))
        assert res[5] == pytest.approx(-h / (2 * 0.5))
        assert divergence_sup(grid) == pytest.approx(h / (2 * 0.5))

    def test_3d_residual_indexing(self, rng):
        grid = random_grid_3d(rng, (6, 6, 6))
        assert abs(ddf_residual_3d(grid, 3, 3, 3)) <= 1e-12
        with pytest.raises(MhdDomainError):
            ddf_residual_3d(grid, 9, 0, 0)

    def test_monotone_under_steps(self, rng, eos):
        grid = random_grid_2d(rng, (8, 8), exact_ddf=False)
        sup = divergence_sup(grid)
        for _ in range(20):
            dt, alphas = max_dt(grid, eos, 1.0)
            grid = lf_step_2d(grid, eos, dt, *alphas)
            new = divergence_sup(grid)
            assert new <= sup + 1e-13 * max(1.0, sup)
            sup = new


class FieldBundle:
    def __init__(self, rho, velocity, pressure, bfield):
        self.rho = rho
        self.velocity = velocity
        self.pressure = pressure
        self.bfield = bfield


class TestInitialization:
    def test_uniform_2d(self, eos):
        fields = FieldBundle(
            rho=lambda x, y: np.broadcast_to(1.0, np.shape(x + y)).copy(),
            velocity=lambda x, y: stack3(x + y, 0.1, 0.2, 0.0),
            pressure=lambda x, y: np.broadcast_to(2.0, np.shape(x + y)).copy(),
            bfield=lambda x, y: stack3(x + y, 0.5, -0.5, 0.25))
        geom = GridGeometry(counts=(6, 6), spacings=(0.2, 0.3),
                            origin=(0.0, 0.0))
        grid = init_cellavg_2d(fields, geom, (PERIODIC, PERIODIC), eos)
        assert divergence_sup(grid) <= 1e-13
        np.testing.assert_allclose(grid.interior[..., 0], 1.0)
        np.testing.assert_allclose(grid.interior[..., 1], 0.1)

    def test_linear_divfree_field(self, eos):
        fields = FieldBundle(
            rho=lambda x, y: np.broadcast_to(1.0, np.shape(x + y)).copy(),
            velocity=lambda x, y: stack3(x + y, 0.0, 0.0, 0.0),
            pressure=lambda x, y: np.broadcast_to(1.0, np.shape(x + y)).copy(),
            bfield=lambda x, y: np.stack(
                [y + 0 * x, x + 0 * y, 0 * (x + y)], axis=-1))
        geom = GridGeometry(counts=(8, 8), spacings=(0.25, 0.125),
                            origin=(-1.0, -0.5))
        grid = init_cellavg_2d(fields, geom,
                               ((OUTFLOW, OUTFLOW), (OUTFLOW, OUTFLOW)), eos)
        inner = np.abs([[ddf_residual_2d(grid, i, j) for j in range(1, 7)]
                        for i in range(1, 7)])
        assert inner.max() <= 1e-13

    def test_vortex_preset_divergence(self, eos):
        from ppmhd.presets import get_preset
        from ppmhd.states import IdealGasEos

        pre = get_preset("vortex-2d")
        geom = pre.geometry((64, 64))
        grid = init_cellavg_2d(pre.fields, geom, pre.boundary,
                               IdealGasEos(pre.gamma), order=8)
        assert divergence_sup(grid) <= 1e-10
        assert np.all(is_admissible(grid.interior))

    def test_3d_divfree_field(self, eos):
        fields = FieldBundle(
            rho=lambda x, y, z: np.broadcast_to(
                1.0, np.shape(x + y + z)).copy(),
            velocity=lambda x, y, z: stack3(x + y + z, 0.0, 0.0, 0.0),
            pressure=lambda x, y, z: np.broadcast_to(
                1.0, np.shape(x + y + z)).copy(),
            bfield=lambda x, y, z: np.stack(
                [y - z + 0 * x, z - x + 0 * y, x - y + 0 * z], axis=-1))
        geom = GridGeometry(counts=(6, 6, 6), spacings=(0.3, 0.2, 0.25),
                            origin=(0.0, 0.0, 0.0))
        grid = init_cellavg_3d(fields, geom, (PERIODIC,) * 3, eos)
        inner = np.abs([[[ddf_residual_3d(grid, i, j, k)
                          for k in range(1, 5)] for j in range(1, 5)]
                        for i in range(1, 5)])
        assert inner.max() <= 1e-12

    def test_z_independent_3d_matches_2d(self, eos):
        f2 = FieldBundle(
            rho=lambda x, y: 1.0 + 0.1 * np.sin(x) * np.cos(y),
            velocity=lambda x, y: stack3(x + y, 0.3, -0.1, 0.0),
            pressure=lambda x, y: 1.0 + 0.2 * np.cos(x + y),
            bfield=lambda x, y: np.stack(
                [np.cos(y) + 0 * x, np.cos(x) + 0 * y, 0 * (x + y)],
                axis=-1))
        def _lift(f):
            def lifted(x, y, z):
                s = x + y + z
                return f(x + 0 * s, y + 0 * s)
            return lifted

        f3 = FieldBundle(rho=_lift(f2.rho), velocity=_lift(f2.velocity),
                         pressure=_lift(f2.pressure), bfield=_lift(f2.bfield))
        geom2 = GridGeometry(counts=(6, 6), spacings=(1.0, 1.0),
                             origin=(0.0, 0.0))
        geom3 = GridGeometry(counts=(6, 6, 4), spacings=(1.0, 1.0, 0.5),
                             origin=(0.0, 0.0, 0.0))
        g2 = init_cellavg_2d(f2, geom2, (PERIODIC, PERIODIC), eos)
        g3 = init_cellavg_3d(f3, geom3, (PERIODIC,) * 3, eos)
        np.testing.assert_allclose(g3.interior[:, :, 1], g2.interior,
                                   rtol=1e-12, atol=1e-13)

    def test_low_order_rejected(self, eos):
        fields = FieldBundle(None, None, None, None)
        geom = GridGeometry(counts=(4, 4), spacings=(1.0, 1.0),
                            origin=(0.0, 0.0))
        with pytest.raises(MhdDomainError):
            init_cellavg_2d(fields, geom, (PERIODIC, PERIODIC), eos, order=1)

    def test_1d_two_state_init(self, eos):
        from ppmhd.presets import get_preset
        from ppmhd.states import IdealGasEos

        pre = get_preset("vacuum-tube-1d")
        geom = pre.geometry((64,))
        grid = init_cellavg_1d(pre.fields, geom, pre.boundary,
                               IdealGasEos(pre.gamma))
        assert np.all(is_admissible(grid.interior))
        assert grid.b_const == pytest.approx(0.0)


class TestSchemePositivityInvariants:
    def test_1d_random_grids(self, rng, eos):
        for _ in range(60):
            grid = random_grid_1d(rng, int(rng.integers(8, 20)))
            cfl = float(rng.choice([0.1, 0.5, 1.0]))
            b1 = np.array(grid.interior[:, BX])
            dt, alphas = max_dt(grid, eos, cfl)
            out = lf_step_1d(grid, eos, dt, alphas[0])
            assert np.all(is_admissible(out.interior))
            assert np.max(np.abs(out.interior[:, BX] - b1)) <= 1e-14 * max(
                1.0, np.max(np.abs(b1)))

    def test_2d_random_ddf_grids(self, rng, eos):
        for _ in range(40):
            grid = random_grid_2d(rng, (int(rng.integers(6, 12)),) * 2)
            assert divergence_sup(grid) <= 1e-12
            dt, alphas = max_dt(grid, eos, 1.0)
            out = lf_step_2d(grid, eos, dt, *alphas)
            assert np.all(is_admissible(out.interior))
            assert divergence_sup(out) <= 1e-13

    def test_3d_random_ddf_grids(self, rng, eos):
        for _ in range(15):
            grid = random_grid_3d(rng, (6, 6, 6))
            dt, alphas = max_dt(grid, eos, 1.0)
            out = lf_step_3d(grid, eos, dt, *alphas)
            assert np.all(is_admissible(out.interior))
            assert divergence_sup(out) <= 1e-13
