import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slowbond.grid import (
    Field,
    Grid,
    Trajectory,
    boundary_trace,
    discrete_gradient,
    divergence,
    field_row,
    l2_inner,
    project_profile,
    spacetime_l2_distance,
    walpha_inner,
)

from conftest import cos2pi


class TestGrid:
    def test_geometry(self):
        g = Grid(10)
        assert g.h * g.n == 1.0
        assert np.allclose(g.centers, (np.arange(10) + 0.5) / 10)
        assert g.bond_positions.size == 10
        assert Grid(10, "interval").bond_positions.size == 9

    @pytest.mark.parametrize("n", [0, 1, -3])
    def test_rejects_small(self, n):
        with pytest.raises(ValueError):
            Grid(n)

    def test_rejects_bad_topology_and_type(self):
        with pytest.raises(ValueError):
            Grid(8, "sphere")
        with pytest.raises(TypeError):
            Grid(8.0)


class TestField:
    def test_validation(self):
        g = Grid(4)
        with pytest.raises(ValueError):
            Field(g, [1.0, 2.0])
        with pytest.raises(ValueError):
            Field(g, [1.0, np.nan, 0.0, 0.0])
        with pytest.raises(ValueError):
            Field(g, np.zeros(4), time=-1.0)

    def test_values_are_read_only(self):
        f = Field(Grid(4), np.zeros(4))
        with pytest.raises(ValueError):
            f.values[0] = 1.0


class TestProjectProfile:
    def test_constant(self):
        f = project_profile(lambda u: 0.5, Grid(8))
        assert np.all(f.values == 0.5)

    def test_cos_midpoints(self):
        f = project_profile(cos2pi, Grid(4))
        s = math.sqrt(2) / 2
        assert np.allclose(f.values, [s, -s, -s, s], atol=1e-15)

    def test_identity_mean_is_half(self):
        assert project_profile(lambda u: u, Grid(10)).mean() == pytest.approx(0.5, abs=1e-15)

    def test_scalar_only_profile(self):
        f = project_profile(lambda u: 1.0 if u < 0.5 else 0.0, Grid(4))
        assert list(f.values) == [1.0, 1.0, 0.0, 0.0]

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="not finite"):
            project_profile(lambda u: np.where(u < 0.5, np.inf, 0.0), Grid(4))


class TestInnerProducts:
    def test_unit(self, torus):
        one = Field(torus, np.ones(torus.n))
        assert l2_inner(one, one) == pytest.approx(1.0, abs=1e-15)

    def test_cos_sin(self):
        g = Grid(64)
        c = project_profile(cos2pi, g)
        s = project_profile(lambda u: np.sin(2 * np.pi * u), g)
        assert abs(l2_inner(c, c) - 0.5) <= 1e-12
        assert abs(l2_inner(c, s)) <= 1e-12

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            l2_inner(Field(Grid(4), np.ones(4)), Field(Grid(8), np.ones(8)))

    def test_walpha_constant(self):
        one = Field(Grid(8), np.ones(8))
        assert walpha_inner(one, one, 2.0) == pytest.approx(1.5)

    def test_walpha_cos(self):
        c = project_profile(cos2pi, Grid(64))
        tr, _ = boundary_trace(c)
        assert walpha_inner(c, c, 1.0) == pytest.approx(0.5 + tr * tr, abs=1e-12)
        assert walpha_inner(c, c, 1.0) == pytest.approx(1.5, abs=1e-2)

    def test_walpha_vanishing_trace_reduces(self, rng):
        g = Grid(32)
        v = rng.normal(size=32)
        v[0] = v[1] = 0.0
        f = Field(g, v)
        for alpha in (1e-3, 1.0, 1e3):
            assert walpha_inner(f, f, alpha) == l2_inner(f, f)

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_walpha_rejects_alpha(self, alpha):
        one = Field(Grid(4), np.ones(4))
        with pytest.raises(ValueError):
            walpha_inner(one, one, alpha)

    def test_walpha_needs_torus(self):
        one = Field(Grid(4, "interval"), np.ones(4))
        with pytest.raises(ValueError):
            walpha_inner(one, one, 1.0)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (3, 12), elements=st.floats(-10, 10)),
           st.floats(-3, 3), st.floats(1e-3, 1e3))
    def test_bilinear_symmetric(self, data, c, alpha):
        g = Grid(12)
        f1, f2, f3 = (Field(g, row) for row in data)
        for ip in (l2_inner, lambda a, b: walpha_inner(a, b, alpha)):
            lhs = ip(Field(g, f1.values + c * f2.values), f3)
            rhs = ip(f1, f3) + c * ip(f2, f3)
            scale = 1 + abs(ip(f1, f1)) + abs(ip(f2, f2)) + abs(ip(f3, f3))
            assert abs(lhs - rhs) <= 1e-12 * scale * (1 + abs(c))
            assert abs(ip(f1, f2) - ip(f2, f1)) <= 1e-12 * scale

    def test_midpoint_rule_order(self):
        errs = []
        for n in (16, 32, 64):
            f = project_profile(lambda u: np.exp(u), Grid(n, "interval"))
            errs.append(abs(l2_inner(f, f) - (math.e ** 2 - 1) / 2))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.95)


class TestCalculus:
    def test_constant_gradient(self, torus):
        assert np.all(discrete_gradient(Field(torus, np.full(torus.n, 3.0))) == 0)

    def test_linear_interior(self):
        g = Grid(16, "interval")
        b = discrete_gradient(project_profile(lambda u: u, g))
        assert b.size == 15
        assert np.allclose(b, 1.0, atol=1e-12)

    def test_gradient_order(self):
        errs = []
        for n in (64, 128, 256):
            g = Grid(n)
            b = discrete_gradient(project_profile(cos2pi, g))
            errs.append(np.max(np.abs(b + 2 * np.pi * np.sin(2 * np.pi * g.bond_positions))))
        assert errs[-1] <= 1e-3
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5

    def test_summation_by_parts(self, rng, torus):
        f = Field(torus, rng.normal(size=torus.n))
        b = rng.normal(size=torus.n)
        lhs = torus.h * np.dot(discrete_gradient(f), b)
        rhs = -l2_inner(f, Field(torus, divergence(b, torus)))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_divergence_needs_torus(self):
        with pytest.raises(ValueError):
            divergence(np.zeros(3), Grid(4, "interval"))


class TestTrajectory:
    def test_from_frames_checks_times(self):
        g = Grid(4)
        frames = [Field(g, np.zeros(4), 0.0), Field(g, np.zeros(4), 0.2)]
        with pytest.raises(ValueError):
            Trajectory.from_frames(frames, 0.1)
        traj = Trajectory.from_frames(frames, 0.2)
        assert len(traj) == 2 and traj.T == pytest.approx(0.2)
        assert traj.frame(1).time == pytest.approx(0.2)

    def test_distance_zero_and_constant(self):
        g = Grid(8)
        a = Trajectory(g, 0.01, np.zeros((101, 8)))
        b = Trajectory(g, 0.01, np.ones((101, 8)))
        assert spacetime_l2_distance(a, a) == 0.0
        assert spacetime_l2_distance(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_distance_exponential(self):
        # frozen oracle: sqrt((1 - e^-2) / 2) from a 30-digit quadrature
        g = Grid(8)
        t = np.arange(1001) * 1e-3
        a = Trajectory(g, 1e-3, np.exp(-t)[:, None] * np.ones(8))
        b = Trajectory(g, 1e-3, np.zeros((1001, 8)))
        assert spacetime_l2_distance(a, b) == pytest.approx(0.6575198539828996, abs=1e-4)

    @pytest.mark.parametrize("other", [
        Trajectory(Grid(4), 0.1, np.zeros((3, 4))),
        Trajectory(Grid(8), 0.2, np.zeros((3, 8))),
        Trajectory(Grid(8), 0.1, np.zeros((4, 8))),
    ])
    def test_distance_mismatch(self, other):
        with pytest.raises(ValueError):
            spacetime_l2_distance(Trajectory(Grid(8), 0.1, np.zeros((3, 8))), other)


def test_field_row_round_trips():
    f = Field(Grid(3), [1 / 3, -2.5e-17, 7.0], time=0.1)
    row = field_row(f)
    assert [float(x) for x in row] == [0.1, 1 / 3, -2.5e-17, 7.0]
