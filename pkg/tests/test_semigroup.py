"""Grid evolution: spectral factors, sup-of-factors stepping, exact drift
semigroup, and the structural inequality checks."""

import numpy as np
import pytest

from sublev.errors import PaddingInsufficient
from sublev.functions import from_univariate, gaussian_bump, plateau_bump, smoothed_ramp
from sublev.generator import envelope_field
from sublev.grids import GridFunction
from sublev.semigroup import (drift_uncertainty_exact, dynkin_sandwich_check,
                              estimate_generator, evolve,
                              frame_lipschitz_constants, linear_levy_step,
                              lipschitz_favard_check, nisio_step,
                              slope_bounds_check)
from sublev.triplets import CharacteristicFamily, JumpMeasure, LevyTriplet


def drift_family(levels, name="drift"):
    table = {float(b): LevyTriplet(0.0, [float(b)], [[0.0]]) for b in levels}
    return CharacteristicFamily(sorted(table), table, conservative=True, name=name)


def brownian_family(q=1.0):
    return CharacteristicFamily.from_table(
        {"bm": LevyTriplet(0.0, [0.0], [[float(q)]])}, conservative=True,
        name="brownian")


def gaussian_density(x, var):
    return np.exp(-0.5 * x**2 / var) / np.sqrt(2 * np.pi * var)


class TestLinearStep:
    def test_heat_kernel_widens_gaussian(self):
        var, dt = 1.0, 0.25
        grid = GridFunction.sample(lambda x: gaussian_density(x, var), -8, 8, 513)
        out = linear_levy_step(LevyTriplet(0.0, [0.0], [[1.0]]), grid, dt)
        exact = gaussian_density(grid.nodes(), var + dt)
        rel = np.max(np.abs(out.values - exact)) / np.max(exact)
        assert rel < 1e-6

    def test_pure_drift_translates(self):
        b, dt = 0.7, 0.3
        grid = GridFunction.sample(lambda x: gaussian_density(x, 1.0), -8, 8, 513)
        out = linear_levy_step(LevyTriplet(0.0, [b], [[0.0]]), grid, dt)
        exact = gaussian_density(grid.nodes() + b * dt, 1.0)
        rel = np.max(np.abs(out.values - exact)) / np.max(exact)
        assert rel < 1e-6

    def test_poisson_step_matches_series(self):
        lam, dt = 2.0, 0.3
        grid = GridFunction.sample(lambda x: gaussian_density(x, 1.0), -40, 40, 2049)
        nu = JumpMeasure.from_atoms([[1.0]], [lam])
        out = linear_levy_step(LevyTriplet(0.0, [0.0], [[0.0]], nu), grid, dt)
        x = grid.nodes()
        series = np.zeros_like(x)
        fact, rate = 1.0, lam * dt
        for k in range(21):
            series += np.exp(-rate) * rate**k / fact * gaussian_density(x + k, 1.0)
            fact *= k + 1
        rel = np.max(np.abs(out.values - series)) / np.max(np.abs(series))
        assert rel < 1e-6

    def test_killing_decays_constants(self):
        grid = GridFunction(-4, 4, np.full(65, 0.8))
        out = linear_levy_step(LevyTriplet(0.5, [0.0], [[0.0]]), grid, 0.2)
        assert np.allclose(out.values, 0.8 * np.exp(-0.1), atol=1e-14)

    def test_unwindowed_ramp_raises_padding_error(self):
        # data with unequal edge values leaves residue in the pads
        grid = GridFunction.sample(lambda x: np.tanh(x), -4, 4, 257)
        with pytest.raises(PaddingInsufficient):
            linear_levy_step(LevyTriplet(0.0, [0.0], [[1.0]]), grid, 0.1)

    def test_two_dimensional_heat(self):
        var, dt = 1.0, 0.2

        def density(p, v):
            r2 = np.sum(p * p, axis=-1)
            return np.exp(-0.5 * r2 / v) / (2 * np.pi * v)

        grid = GridFunction.sample(lambda p: density(p, var), -8, 8, 129, dim=2)
        out = linear_levy_step(
            LevyTriplet(0.0, np.zeros(2), np.eye(2)), grid, dt)
        axis = grid.nodes()
        P = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
        exact = density(P, var + dt)
        assert np.max(np.abs(out.values - exact)) / np.max(exact) < 1e-6


class TestNisioStep:
    def test_singleton_equals_linear_step(self):
        fam = brownian_family()
        grid = GridFunction.sample(lambda x: gaussian_density(x, 1.0), -8, 8, 257)
        stepped, argmax = nisio_step(fam, grid, 0.1)
        direct = linear_levy_step(fam.at("bm", [0.0]), grid, 0.1)
        assert np.array_equal(stepped.values, direct.values)
        assert np.all(argmax == 0)

    def test_drift_pair_argmax_follows_slope_sign(self):
        fam = drift_family([-1.0, 1.0])
        grid = GridFunction.sample(lambda x: np.exp(-0.5 * x**2), -8, 8, 513)
        dt = 0.05
        _, argmax = nisio_step(fam, grid, dt)
        nodes = grid.nodes()
        inc = (nodes < -3 * dt) & (nodes > -4)
        dec = (nodes > 3 * dt) & (nodes < 4)
        assert np.all(argmax[inc] == 1)   # b=+1 wins on the increasing side
        assert np.all(argmax[dec] == 0)

    def test_constants_fixed_exactly(self):
        fam = drift_family([-1.0, 0.0, 1.0])
        grid = GridFunction(-4, 4, np.full(65, 0.37))
        stepped, _ = nisio_step(fam, grid, 0.1)
        assert np.array_equal(stepped.values, grid.values)


class TestEvolve:
    def test_singleton_brownian_matches_heat_flow(self):
        fam = brownian_family()
        var, t = 1.0, 0.5
        grid = GridFunction.sample(lambda x: gaussian_density(x, var), -8, 8, 513)
        traj = evolve(fam, grid, t, 64)
        exact = gaussian_density(grid.nodes(), var + t)
        assert np.max(np.abs(traj.frames[-1].values - exact)) < 1e-4

    def test_self_convergence_richardson_ratio(self):
        fam = drift_family(np.linspace(-1, 1, 5))
        grid = GridFunction.sample(lambda x: np.exp(-x**2), -6, 6, 513)
        t = 0.5
        sols = {n: evolve(fam, grid, t, n).frames[-1].values for n in (8, 16, 32)}
        d1 = np.max(np.abs(sols[8] - sols[16]))
        d2 = np.max(np.abs(sols[16] - sols[32]))
        assert d1 / d2 >= 1.8

    def test_semigroup_property_bitwise(self):
        fam = drift_family([-1.0, 0.0, 1.0])
        grid = GridFunction.sample(lambda x: np.exp(-x**2), -6, 6, 257)
        dt = 1.0 / 32
        full = evolve(fam, grid, 24 * dt, 24).frames[-1]
        first = evolve(fam, grid, 8 * dt, 8).frames[-1]
        second = evolve(fam, first, 16 * dt, 16).frames[-1]
        assert np.array_equal(full.values, second.values)

    def test_monotonicity_framewise(self):
        fam = drift_family([-1.0, 1.0])
        f = GridFunction.sample(lambda x: np.exp(-x**2), -6, 6, 257)
        g = GridFunction.sample(lambda x: np.exp(-x**2) + 0.3 * np.exp(-0.25 * x**2),
                                -6, 6, 257)
        tf = evolve(fam, f, 0.5, 16)
        tg = evolve(fam, g, 0.5, 16)
        for a, b in zip(tf.frames, tg.frames):
            assert np.all(a.values <= b.values + 1e-12)

    def test_sub_markov_range_preserved(self):
        fam = drift_family([-1.0, 1.0])
        f = GridFunction.sample(lambda x: 0.5 + 0.4 * np.exp(-x**2) * np.cos(x),
                                -6, 6, 257)
        assert np.all((f.values >= 0) & (f.values <= 1))
        traj = evolve(fam, f, 0.5, 16)
        for fr in traj.frames:
            assert np.all(fr.values >= -1e-9)
            assert np.all(fr.values <= 1 + 1e-9)

    def test_sublinearity_framewise(self):
        fam = drift_family([-1.0, 0.0, 1.0])
        f = GridFunction.sample(lambda x: np.exp(-x**2), -6, 6, 257)
        g = GridFunction.sample(lambda x: 0.5 * np.exp(-2 * (x - 0.5)**2), -6, 6, 257)
        fg = GridFunction.sample(
            lambda x: np.exp(-x**2) + 0.5 * np.exp(-2 * (x - 0.5)**2), -6, 6, 257)
        t, n = 0.4, 16
        sum_traj = evolve(fam, fg, t, n)
        f_traj, g_traj = evolve(fam, f, t, n), evolve(fam, g, t, n)
        for s, a, b in zip(sum_traj.frames, f_traj.frames, g_traj.frames):
            assert np.all(s.values <= a.values + b.values + 1e-10)
        lam = 1.7
        lf = evolve(fam, f.with_values(lam * f.values), t, n)
        for a, b in zip(lf.frames, f_traj.frames):
            assert np.allclose(a.values, lam * b.values, atol=1e-12)

    def test_contraction_for_conservative_family(self):
        fam = drift_family([-1.0, 1.0])
        f = GridFunction.sample(lambda x: np.exp(-x**2) * np.sin(3 * x), -6, 6, 513)
        traj = evolve(fam, f, 0.5, 32)
        sup0 = traj.frames[0].sup_norm()
        for fr in traj.frames[1:]:
            assert fr.sup_norm() <= sup0 + 1e-10

    def test_frame_lipschitz_constants_non_increasing(self):
        fam = drift_family(np.linspace(-1, 1, 5))
        f = GridFunction.sample(lambda x: np.exp(-x**2), -6, 6, 513)
        L = frame_lipschitz_constants(evolve(fam, f, 0.5, 32))
        assert np.all(np.diff(L) <= 1e-6 * (1 + L[0]))


class TestDriftUncertaintyExact:
    def test_time_zero_is_identity(self):
        f = GridFunction.sample(lambda x: np.sin(x), -4, 4, 65)
        assert drift_uncertainty_exact(f, 0.0) is f

    def test_negative_absolute_value_oracle(self):
        f = GridFunction.sample(lambda x: -np.abs(x), -4, 4, 257)
        for t in (0.1, 0.37, 1.0):
            out = drift_uncertainty_exact(f, t)
            exact = -np.maximum(np.abs(f.nodes()) - t, 0.0)
            assert np.max(np.abs(out.values - exact)) < 1e-13

    def test_smooth_function_against_dense_oracle(self):
        cf = lambda x: np.exp(-x**2) + 0.4 * np.exp(-4 * (x - 1.2)**2)
        f = GridFunction.sample(cf, -6, 6, 2049)
        t = 0.63
        out = drift_uncertainty_exact(f, t)
        for x in (-1.0, -0.2, 0.0, 0.4, 1.1):
            s = np.linspace(-t, t, 20001)
            brute = np.max(cf(x + s))
            assert out(x) == pytest.approx(brute, abs=5e-6)

    def test_piecewise_plateau_golden_values(self):
        from sublev.functions import piecewise_plateau_profile

        f = GridFunction.sample(piecewise_plateau_profile, -4, 4, 1025)
        for t in (0.5, 0.75, 1.0):
            assert drift_uncertainty_exact(f, t)(0.0) == pytest.approx(1.0, abs=2e-2)
        for t in (1.0, 1.5, 2.0):
            assert drift_uncertainty_exact(f, t)(0.0) == pytest.approx(t, abs=2e-2)


class TestEstimateGenerator:
    def test_drift_uncertainty_recovers_absolute_derivative(self):
        f_cf = gaussian_bump(width=1.0)
        f = f_cf.on_grid(-6, 6, 8193)
        semigroup = lambda g, t: drift_uncertainty_exact(g, t)
        t_list = 0.4 * 0.5 ** np.arange(6)
        for x in (-1.3, -0.4, 0.6, 1.5):
            _, limit = estimate_generator(semigroup, f, x, t_list)
            expected = abs(f_cf.gradient(np.array([[x]]))[0, 0])
            assert limit == pytest.approx(expected, abs=1e-2)

    def test_brownian_cosine_limit(self):
        fam = brownian_family()
        f = GridFunction.sample(np.cos, -4 * np.pi, 4 * np.pi, 1025)
        semigroup = lambda g, t: evolve(fam, g, t, 1).frames[-1]
        _, limit = estimate_generator(semigroup, f, 0.0, 0.2 * 0.5 ** np.arange(5))
        assert limit == pytest.approx(-0.5, abs=1e-5)

    def test_constant_conservative_gives_zero(self):
        fam = drift_family([-1.0, 1.0])
        f = GridFunction(-4, 4, np.full(65, 1.0))
        semigroup = lambda g, t: evolve(fam, g, t, 4).frames[-1]
        _, limit = estimate_generator(semigroup, f, 0.0, 0.2 * 0.5 ** np.arange(4))
        assert limit == 0.0


def windowed_ramp():
    return smoothed_ramp(1.0) * plateau_bump(4.0, 8.0)


class TestDynkinSandwich:
    def test_time_zero(self):
        rep = dynkin_sandwich_check(brownian_family(), gaussian_bump(), 0.0,
                                    0.0, -6, 6, 257)
        assert rep.lower == rep.middle == rep.upper == 0.0 and rep.passed

    def test_singleton_collapses_to_equality(self):
        rep = dynkin_sandwich_check(brownian_family(), gaussian_bump(), 0.3,
                                    0.2, -6, 6, 513, quadrature_n=64)
        assert rep.passed
        assert abs(rep.upper - rep.middle) <= rep.tol
        assert abs(rep.middle - rep.lower) <= rep.tol
        assert not rep.strict

    def test_strict_gap_when_slope_peaks_at_x(self):
        fam = drift_family([-1.0, 0.0, 1.0])
        rep = dynkin_sandwich_check(fam, windowed_ramp(), 0.5, 0.0,
                                    -12, 12, 769, quadrature_n=64)
        assert rep.passed and rep.strict
        # middle = f(t) - f(0), upper = t for the unit-peak slope
        from scipy.special import erf
        middle_exact = 0.5 * np.sqrt(np.pi) * erf(0.5)
        assert rep.middle == pytest.approx(middle_exact, abs=5e-3)
        assert rep.upper == pytest.approx(0.5, abs=5e-3)
        assert rep.lower == pytest.approx(-0.5, abs=5e-3)


class TestSlopeBounds:
    def test_drift_family_bounds_hold(self):
        fam = drift_family([-1.0, 0.0, 1.0])
        rep = slope_bounds_check(fam, gaussian_bump(), [0.0, 0.1, 0.25],
                                 0.4, -8, 8, 513, dt=1.0 / 64)
        assert rep.passed
        # at t=0 the slope approaches env(f)(x) = |f'|(x)
        f = gaussian_bump()
        expected = abs(f.gradient(np.array([[0.4]]))[0, 0])
        assert rep.rows[0]["upper"] == pytest.approx(expected, abs=1e-6)

    def test_singleton_bounds_coincide(self):
        rep = slope_bounds_check(brownian_family(), gaussian_bump(),
                                 [0.0, 0.2], 0.0, -6, 6, 257, dt=1.0 / 32)
        assert rep.passed
        for row in rep.rows:
            assert row["lower"] == pytest.approx(row["upper"], abs=1e-12)

    def test_constant_everything_zero(self):
        from sublev.functions import constant_fn

        fam = drift_family([-1.0, 1.0])
        rep = slope_bounds_check(fam, constant_fn(0.7), [0.0, 0.1],
                                 0.0, -4, 4, 65, dt=1.0 / 16)
        assert rep.passed
        for row in rep.rows:
            assert row["slope"] == 0.0
            assert row["lower"] == 0.0 and row["upper"] == 0.0


class TestLipschitzFavard:
    def test_brownian_sine_half(self):
        fam = brownian_family()
        f = from_univariate(np.sin, np.cos, lambda x: -np.sin(x), 1.0, 1.0, 1.0)
        semigroup = lambda g, t: evolve(fam, g, t, 1).frames[-1]
        t_grid = [0.004, 0.02, 0.1, 0.3, 0.5]
        rep = lipschitz_favard_check(fam, f, t_grid, -4 * np.pi, 4 * np.pi,
                                     1025, semigroup=semigroup, rtol=1e-3,
                                     pair_tol=1e-6)
        assert rep.env_sup == pytest.approx(0.5, abs=1e-12)
        assert rep.measured_sup == pytest.approx(0.5, abs=1e-3)
        assert rep.passed

    def test_constant_function_all_zero(self):
        from sublev.functions import constant_fn

        fam = drift_family([-1.0, 1.0])
        rep = lipschitz_favard_check(fam, constant_fn(0.4), [0.1, 0.2],
                                     -4, 4, 65, rtol=1.0)
        assert rep.env_sup == 0.0
        assert rep.measured_sup == 0.0
        assert rep.pairwise_ok

    def test_drift_family_gradient_norm(self):
        fam = drift_family(np.linspace(-1, 1, 21))
        f = gaussian_bump(width=1.0)
        semigroup = lambda g, t: drift_uncertainty_exact(g, t)
        t_grid = [0.01, 0.05, 0.1, 0.2]
        rep = lipschitz_favard_check(fam, f, t_grid, -6, 6, 4097,
                                     semigroup=semigroup, rtol=0.05,
                                     pair_tol=1e-4)
        assert rep.env_sup == pytest.approx(np.exp(-0.5), abs=1e-4)
        assert rep.passed
