import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slowbond.grid import Field, Grid, Trajectory, project_profile
from slowbond.heat import (
    BondRates,
    CosineCoeffs,
    CyclicTridiagonal,
    FourierCoeffs,
    SolverSpec,
    ThetaStepper,
    build_conductances,
    cosine_coefficients,
    fourier_coefficients,
    laplacian_matrix,
    mass_drift,
    neumann_rates,
    robin_bc_residual,
    semidiscrete_rhs,
    solve,
    spectral_neumann,
    spectral_periodic,
    step_theta,
    stream,
)

from conftest import cos2pi, halfcos


class TestConductances:
    def test_all_ones_at_beta_zero(self):
        assert list(build_conductances(4, 1.0, 0.0).conductance) == [1, 1, 1, 1]

    def test_slow_bond_value(self):
        c = build_conductances(10, 2.0, 1.0).conductance
        assert c[9] == pytest.approx(0.2, rel=1e-15)
        assert np.all(c[:9] == 1.0)

    @pytest.mark.parametrize("alpha", [1e-3, 1.0, 7.5])
    def test_blocked_bond(self, alpha):
        assert build_conductances(10, alpha, math.inf).conductance[9] == 0.0

    @pytest.mark.parametrize("alpha", [0.0, -1.0, math.nan, math.inf])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ValueError):
            build_conductances(10, alpha, 1.0)

    def test_rejects_negative_conductance(self):
        with pytest.raises(ValueError):
            BondRates(3, None, None, [1.0, -1.0, 1.0])


class TestRhs:
    def test_constant_in_kernel(self):
        f = Field(Grid(6), np.full(6, 0.7))
        assert np.all(semidiscrete_rhs(f, build_conductances(6, 3.0, 1.0)).values == 0)

    def test_stencil_by_hand(self):
        f = Field(Grid(4), [1.0, 0, 0, 0])
        g = semidiscrete_rhs(f, build_conductances(4, 1.0, 0.0))
        assert list(g.values) == [-32.0, 16.0, 0.0, 16.0]

    def test_blocked_bond_by_hand(self):
        f = Field(Grid(4), [1.0, 0, 0, 0])
        g = semidiscrete_rhs(f, build_conductances(4, 1.0, math.inf))
        assert list(g.values) == [-16.0, 16.0, 0.0, 0.0]

    def test_sum_is_zero_and_matches_matrix(self, rng):
        rates = BondRates(9, None, None, rng.uniform(0, 2, 9))
        f = Field(Grid(9), rng.normal(size=9))
        g = semidiscrete_rhs(f, rates).values
        assert abs(g.sum()) <= 1e-12 * np.abs(g).sum()
        assert np.allclose(g, laplacian_matrix(rates) @ f.values, rtol=1e-13, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            semidiscrete_rhs(Field(Grid(4), np.zeros(4)), build_conductances(5, 1.0, 1.0))


class TestCyclicSolver:
    @pytest.mark.parametrize("n", [2, 3, 17, 200])
    def test_matches_dense(self, rng, n):
        a, c = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
        b = 2.5 + rng.uniform(0, 1, n)
        A = np.diag(b)
        for i in range(n):
            A[i, (i - 1) % n] += a[i]
            A[i, (i + 1) % n] += c[i]
        d = rng.normal(size=n)
        x = CyclicTridiagonal(a, b, c).solve(d)
        assert np.linalg.norm(A @ x - d) <= 1e-13 * np.linalg.norm(d) * np.linalg.cond(A)
        assert np.allclose(x, np.linalg.solve(A, d), rtol=1e-12, atol=1e-13)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            CyclicTridiagonal(np.zeros(3), np.ones(4), np.zeros(4))
        with pytest.raises(ValueError):
            CyclicTridiagonal(np.zeros(4), np.ones(4), np.zeros(4)).solve(np.ones(3))


class TestStep:
    @pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
    def test_constant_steady(self, theta):
        f = Field(Grid(12), np.full(12, 0.4))
        out = step_theta(f, build_conductances(12, 0.3, 1.0), 1e-3, theta)
        assert np.allclose(out.values, 0.4, rtol=0, atol=1e-15)
        assert out.time == pytest.approx(1e-3)

    def test_eigenmode_decay(self):
        n, dt = 64, 1e-4
        f = project_profile(cos2pi, Grid(n))
        lam = 4 * n * n * math.sin(math.pi / n) ** 2
        out = step_theta(f, build_conductances(n, 1.0, 0.0), dt, 0.5)
        rel = np.max(np.abs(out.values - math.exp(-lam * dt) * f.values)) / np.max(np.abs(f.values))
        assert rel <= (lam * dt) ** 3

    def test_matches_dense_theta_scheme(self, rng):
        rates = BondRates(7, None, None, rng.uniform(0, 1, 7))
        L = laplacian_matrix(rates)
        f = rng.normal(size=7)
        dt, theta = 3e-3, 0.3
        expect = np.linalg.solve(np.eye(7) - theta * dt * L, (np.eye(7) + (1 - theta) * dt * L) @ f)
        got = step_theta(Field(Grid(7), f), rates, dt, theta).values
        assert np.allclose(got, expect, rtol=1e-12, atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(3, 40), st.floats(1e-6, 1e-1), st.floats(0, 1), st.integers(0, 2 ** 32 - 1))
    def test_mass_conservation(self, n, dt, theta, seed):
        r = np.random.default_rng(seed)
        rates = BondRates(n, None, None, r.uniform(0, 3, n))
        f = Field(Grid(n), r.normal(size=n))
        out = step_theta(f, rates, dt, theta)
        assert abs(out.values.sum() - f.values.sum()) <= 1e-12 * max(1.0, np.abs(f.values).sum())

    def test_max_principle_implicit(self, rng):
        rates = BondRates(30, None, None, rng.uniform(0, 1, 30))
        f = Field(Grid(30), rng.uniform(-1, 1, 30))
        out = step_theta(f, rates, 0.5, 1.0).values
        assert f.values.min() - 1e-14 <= out.min() and out.max() <= f.values.max() + 1e-14

    def test_max_principle_crank_nicolson_small_step(self, rng):
        n = 30
        rates = BondRates(n, None, None, rng.uniform(0, 1, n))
        dt = 1.0 / n ** 2  # the restriction dt * n^2 <= 1 for conductances <= 1
        f = Field(Grid(n), rng.uniform(-1, 1, n))
        out = ThetaStepper(rates, dt, 0.5).advance(f.values, 50)
        assert np.all(out >= f.values.min() - 1e-14) and np.all(out <= f.values.max() + 1e-14)

    @pytest.mark.parametrize("dt,theta", [(0.0, 0.5), (-1e-3, 0.5), (1e-3, 1.5)])
    def test_rejects(self, dt, theta):
        with pytest.raises(ValueError):
            step_theta(Field(Grid(4), np.zeros(4)), build_conductances(4, 1.0, 1.0), dt, theta)


class TestSolverSpec:
    @pytest.mark.parametrize("kwargs", [
        dict(dt=0.0, T=1.0), dict(dt=2.0, T=1.0), dict(dt=0.3, T=1.0),
        dict(dt=0.1, T=1.0, theta=-0.1), dict(dt=0.1, T=1.0, snapshot_stride=3),
        dict(dt=0.1, T=1.0, snapshot_stride=0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SolverSpec(**kwargs)

    def test_defaults(self):
        s = SolverSpec(dt=0.1, T=1.0)
        assert s.theta == 0.5 and s.nsteps == 10


class TestSolve:
    def test_equilibrium(self):
        traj = solve(lambda u: 0.5, build_conductances(16, 2.0, 1.0), SolverSpec(1e-3, 0.05, 0.5, 10))
        assert np.allclose(traj.values, 0.5, rtol=0, atol=1e-15)

    def test_first_frame_is_projection(self):
        traj = solve(halfcos, build_conductances(16, 2.0, 1.0), SolverSpec(1e-3, 0.01))
        assert np.array_equal(traj.values[0], project_profile(halfcos, Grid(16)).values)
        assert len(traj) == 11 and traj.dt == pytest.approx(1e-3)

    def test_stream_agrees_with_solve(self):
        rates = build_conductances(20, 0.5, 1.0)
        spec = SolverSpec(1e-4, 0.01, 0.5, 5)
        full = np.concatenate(list(stream(halfcos, rates, spec, block=7)))
        assert full.shape == (101, 20)
        assert np.array_equal(full[::5], solve(halfcos, rates, spec).values)

    def test_neumann_matches_cosine_oracle(self):
        traj = solve(halfcos, neumann_rates(256), SolverSpec(1e-5, 0.1, 0.5, 1000))
        for fr in traj:
            exact = spectral_neumann(CosineCoeffs((0.5, 0.5)), fr.time, traj.grid)
            assert np.max(np.abs(fr.values - exact.values)) <= 1e-4

    def test_convergence_order(self):
        errs = []
        for n in (32, 64, 128):
            traj = solve(lambda u: np.cos(np.pi * u), neumann_rates(n), SolverSpec(0.1 / (2 * n), 0.1, 0.5, 2 * n))
            exact = spectral_neumann(CosineCoeffs((0.0, 1.0)), 0.1, traj.grid)
            errs.append(np.max(np.abs(traj.values[-1] - exact.values)))
        assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 1.9)

    @pytest.mark.parametrize("beta", [1.0, math.inf])
    def test_long_time_limit(self, beta):
        traj = solve(halfcos, build_conductances(64, 1.0, beta), SolverSpec(1e-3, 2.0, 0.5, 2000))
        assert np.max(np.abs(traj.values[-1] - 0.5)) <= 1e-6

    def test_even_modes_ignore_alpha(self):
        prof = lambda u: 0.3 + cos2pi(u) - 0.5 * np.cos(6 * np.pi * u)
        spec = SolverSpec(1e-4, 0.02, 0.5, 20)
        runs = [solve(prof, build_conductances(128, a, 1.0), spec).values for a in (0.01, 1.0, 100.0)]
        for r in runs[1:]:
            assert np.max(np.abs(r - runs[0])) <= 1e-10

    def test_mass_drift(self):
        traj = solve(halfcos, build_conductances(64, 3.0, 1.0), SolverSpec(1e-4, 0.1, 0.5, 100))
        assert mass_drift(traj) <= 1e-12


class TestSpectral:
    def test_periodic_constant(self):
        f = spectral_periodic(FourierCoeffs(1.0), 0.7, Grid(8))
        assert np.all(f.values == 1.0)

    def test_periodic_sine_amplitude(self):
        g = Grid(64)
        t = 1 / (4 * math.pi ** 2)
        f = spectral_periodic(FourierCoeffs(0.0, (), (1.0,)), t, g)
        assert np.allclose(f.values, math.exp(-1) * np.sin(2 * np.pi * g.centers), atol=1e-15)
        assert math.exp(-1) == pytest.approx(0.36787944117144233)

    def test_neumann_amplitude_and_limit(self):
        g = Grid(32)
        f = spectral_neumann(CosineCoeffs((0.0, 1.0)), 1 / math.pi ** 2, g)
        assert np.allclose(f.values, math.exp(-1) * np.cos(np.pi * g.centers), atol=1e-15)
        late = spectral_neumann(CosineCoeffs((0.5, 0.5)), 50.0, g)
        assert np.allclose(late.values, 0.5, atol=1e-15)

    def test_coefficients_by_quadrature(self):
        fc = fourier_coefficients(lambda u: 0.2 + np.sin(2 * np.pi * u) + 0.5 * np.cos(4 * np.pi * u), 3)
        assert fc.mean == pytest.approx(0.2, abs=1e-12)
        assert np.allclose(fc.sin, [1, 0, 0], atol=1e-12)
        assert np.allclose(fc.cos, [0, 0.5, 0], atol=1e-12)
        cc = cosine_coefficients(halfcos, 3)
        assert np.allclose(cc.coeffs, [0.5, 0.5, 0, 0], atol=1e-12)


class TestRobinResidual:
    def test_constant_is_zero(self):
        traj = Trajectory(Grid(16), 0.1, np.full((3, 16), 0.25))
        assert np.all(robin_bc_residual(traj, 2.0) == 0.0)

    def test_exact_solution_second_order(self):
        errs = []
        for n in (64, 128, 256):
            g = Grid(n)
            t = np.arange(5) * 0.01
            vals = np.exp(-4 * np.pi ** 2 * t)[:, None] * np.cos(2 * np.pi * g.centers)
            errs.append(np.max(np.abs(robin_bc_residual(Trajectory(g, 0.01, vals), 3.0))))
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5

    def test_refinement_fixed_ratio(self):
        # dt / h^2 = 1/8 on every grid; frames before t = 0.01 hold the initial layer
        errs = []
        for n in (128, 256, 512):
            K = n * n // 8
            traj = solve(halfcos, build_conductances(n, 1.0, 1.0), SolverSpec(0.02 / K, 0.02, 0.5, K // 16))
            keep = traj.times >= 0.01
            errs.append(np.max(np.abs(robin_bc_residual(traj, 1.0)[keep])))
        assert errs[0] / errs[1] >= 1.9 and errs[1] / errs[2] >= 1.9
