import math

import numpy as np
import pytest

from qcflow.evolve import (
    CFLError,
    EvolveConfig,
    SchemeError,
    cfl_dt,
    default_eps_grad,
    evolve,
    evolve_shared,
    radial_evolve,
    step,
)
from qcflow.fields import GridSpec, ScalarField
from qcflow.operators import ArctanShifted, FunctionOperator, make_operator
from qcflow.oracles import example_radial_profile
from qcflow.sublevel import ObstacleSet

K1 = ObstacleSet.ball((0.0, 0.0), 1.0)


def cone(grid, shift=1.0):
    return ScalarField.from_function(grid, lambda p: np.linalg.norm(p, axis=-1) + shift)


def radial_grid(n, r_max=8.0):
    return GridSpec((0.0,), (r_max,), (n,))


@pytest.fixture
def eik():
    return make_operator("nonlocal_eikonal", b=1.0, a_max=math.pi)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"t_end": -1.0}, {"t_end": 1.0, "cfl_first": 0.0}, {"t_end": 1.0, "cfl_first": 1.5},
        {"t_end": 1.0, "cfl_second": 0.6}, {"t_end": 1.0, "eps_grad": 0.0},
        {"t_end": 1.0, "boundary": "periodic"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            EvolveConfig(**kw)

    def test_default_eps(self):
        g = GridSpec.uniform(-1, 1, 11)
        f = cone(g)
        assert default_eps_grad(f) == pytest.approx(1e-8 * (f.max - f.min) / math.dist(g.lower, g.upper))


class TestCFL:
    def test_eikonal(self, eik):
        g = GridSpec.uniform(-2, 2, 201)  # h = 0.02
        dt = cfl_dt(cone(g), eik, K1, EvolveConfig(t_end=1.0))
        assert dt == pytest.approx(0.5 * 0.02 / math.pi, rel=1e-12)

    def test_curvature_flow(self):
        g = GridSpec.uniform(-2, 2, 201)
        op = make_operator("aniso_flow", a_drift=0.0, b=0.0, c=1.0)
        assert cfl_dt(cone(g), op, None, EvolveConfig(t_end=1.0)) == pytest.approx(1e-4, rel=1e-12)

    def test_static_operator(self):
        g = GridSpec.uniform(-1, 1, 11)
        op = make_operator("aniso_flow", a_drift=0.0, b=0.0, c=0.0)
        assert cfl_dt(cone(g), op, None, EvolveConfig(t_end=0.7)) == 0.7
        assert cfl_dt(cone(g), op, None, EvolveConfig(t_end=0.7), remaining=0.2) == 0.2

    def test_step_rejects_large_dt(self, eik):
        g = GridSpec.uniform(-2, 2, 41)
        with pytest.raises(CFLError):
            step(cone(g), eik, K1, 1.0)


class TestStep:
    def test_constant_field_mu_branch(self):
        g = GridSpec.uniform(-1, 1, 21)
        f = ScalarField(g, np.full(g.counts, 2.0))
        op = make_operator("u_dep_flow", V=ArctanShifted())
        dt = 1e-3
        out = step(f, op, K1, dt)
        np.testing.assert_allclose(out.values, 2.0 - dt * math.atan(2.0), atol=1e-15)

    def test_eikonal_saturated_speed(self, eik):
        g = GridSpec.uniform(-3, 3, 121)
        f = cone(g)
        dt = 0.5 * cfl_dt(f, eik, K1, EvolveConfig(t_end=1.0))
        out = step(f, eik, K1, dt)
        r = np.linalg.norm(g.points(), axis=-1)
        far = (r > 1.3) & (r < 2.5)
        drop = (f.values - out.values)[far]
        # measure saturates at the counted area of K, within O(h) of pi
        assert np.allclose(drop, dt * math.pi, rtol=0.05)

    def test_minimum_point_does_not_move(self, eik):
        g = GridSpec.uniform(-3, 3, 121)
        f = cone(g)
        out = step(f, eik, K1, 1e-3)
        c = g.index_of((0.0, 0.0))
        assert out.values[c] == f.values[c]

    def test_non_finite_update(self):
        g = GridSpec.uniform(-1, 1, 11)
        bad = FunctionOperator(lambda r, p, X, a: math.inf, name="inf")
        with pytest.raises(SchemeError):
            step(cone(g), bad, None, 1e-3, check_cfl=False)

    def test_monotone_in_data(self, eik, rng):
        g = GridSpec.uniform(-2, 2, 41)
        u = cone(g)
        v = u.with_values(u.values + rng.uniform(0, 0.05, size=g.counts))
        dt = min(cfl_dt(u, eik, K1, EvolveConfig(t_end=1)), cfl_dt(v, eik, K1, EvolveConfig(t_end=1)))
        assert np.all(step(u, eik, K1, dt).values <= step(v, eik, K1, dt).values + 1e-12)


class TestEvolve:
    def test_t_end_zero(self, eik):
        g = GridSpec.uniform(-2, 2, 21)
        tr = evolve(cone(g), eik, K1, EvolveConfig(t_end=0.0))
        assert tr.times == [0.0]
        assert np.array_equal(tr.final.values, cone(g).values)

    def test_snapshots_and_diagnostics(self, eik):
        g = GridSpec.uniform(-2, 2, 41)
        tr = evolve(cone(g), eik, K1, EvolveConfig(t_end=0.2, snapshot_times=(0.05, 0.1)))
        assert tr.times == [0.0, 0.05, 0.1, 0.2]
        assert all(np.diff(tr.times) > 0)
        csv = tr.diagnostics_csv().splitlines()
        assert csv[0] == "step,time,dt,min,max,measure_mid"
        assert len(csv) == len(tr.diagnostics) + 1
        assert tr.diagnostics[-1].time == 0.2
        with pytest.raises(KeyError):
            tr.at(0.07)

    def test_coercivity_required(self, eik):
        g = GridSpec.uniform(-2, 2, 21)
        f = ScalarField.from_function(g, lambda p: 5.0 - np.linalg.norm(p, axis=-1))
        with pytest.raises(ValueError, match="coercive"):
            evolve(f, eik, K1, EvolveConfig(t_end=0.1))

    def test_positivity_floor_required(self, eik):
        g = GridSpec.uniform(-2, 2, 21)
        with pytest.raises(ValueError, match="floor"):
            evolve(cone(g), eik, K1, EvolveConfig(t_end=0.1, c0=1.5))

    def test_drift_below_floor_flagged(self):
        g = GridSpec.uniform(-2, 2, 41)
        op = make_operator("u_dep_flow", V="constant:1.0")
        tr = evolve(cone(g), op, K1, EvolveConfig(t_end=0.1, c0=1.0))
        assert tr.flags

    def test_example_2d(self, eik):
        g = GridSpec.uniform(-4, 4, 161)
        tr = evolve(cone(g), eik, K1, EvolveConfig(t_end=0.5))
        r = np.linalg.norm(g.points(), axis=-1)
        err = np.abs(tr.final.values - example_radial_profile(r, 0.5, 1.0)).max()
        assert err <= 5e-2

    @pytest.mark.parametrize("kind,params", [
        ("nonlocal_eikonal", {"b": 1.0}),
        ("viscous_hj", {"a_coef": 1.0, "alpha": 0.5}),
        ("u_dep_flow", {"V": "arctan_shifted:0.0"}),
    ])
    def test_positivity_bound(self, kind, params):
        g = GridSpec.uniform(-2, 2, 41)
        op = make_operator(kind, **params)
        u0 = cone(g)
        tr = evolve(u0, op, K1, EvolveConfig(t_end=0.2))
        assert tr.final.min >= u0.min - 0.2 * tr.mu_max - 1e-12

    def test_shared_schedule(self, eik):
        g = GridSpec.uniform(-2, 2, 41)
        a, b = evolve_shared([cone(g), cone(g, 1.5)], eik, K1, EvolveConfig(t_end=0.1))
        assert [d.dt for d in a.diagnostics] == [d.dt for d in b.diagnostics]


class TestRadial:
    def setup_method(self):
        self.g = radial_grid(4001)
        self.phi0 = ScalarField(self.g, self.g.axis(0) + 1.0)

    def test_origin_fixed(self):
        tr = radial_evolve(self.phi0, 1.0, EvolveConfig(t_end=1.0, snapshot_times=(0.25, 0.5)))
        for _, f in tr.snapshots:
            assert f.values[0] == 1.0

    def test_value_at_unit_radius(self):
        tr = radial_evolve(self.phi0, 1.0, EvolveConfig(t_end=1.0))
        i = self.g.index_of((1.0,))[0]
        assert tr.final.values[i] == pytest.approx(1 / (1 + math.pi) + 1, abs=2e-3)

    def test_frozen_vs_self_consistent(self):
        errs = []
        for n in (401, 801):
            g = radial_grid(n)
            phi0 = ScalarField(g, g.axis(0) + 1.0)
            cfg = EvolveConfig(t_end=0.5)
            a = radial_evolve(phi0, 1.0, cfg, "frozen").final.values
            b = radial_evolve(phi0, 1.0, cfg, "self_consistent").final.values
            errs.append(np.abs(a - b).max())
        dr = 8.0 / 400
        assert errs[0] <= 10 * dr
        assert errs[1] < errs[0]

    def test_decreasing_profile(self):
        g = radial_grid(51)
        phi0 = ScalarField(g, 5.0 - g.axis(0) * 0.1)
        with pytest.raises(ValueError):
            radial_evolve(phi0, 1.0, EvolveConfig(t_end=0.1))
        with pytest.warns(RuntimeWarning):
            radial_evolve(phi0, 1.0, EvolveConfig(t_end=0.1), speed="self_consistent")

    def test_bad_grid(self):
        g = GridSpec((1.0,), (8.0,), (11,))
        with pytest.raises(ValueError):
            radial_evolve(ScalarField(g, g.axis(0)), 1.0, EvolveConfig(t_end=0.1))
        with pytest.raises(ValueError):
            radial_evolve(self.phi0, 1.0, EvolveConfig(t_end=0.1), speed="exact")

    def test_matches_2d_solver(self, eik):
        g = GridSpec.uniform(-4, 4, 201)
        tr2 = evolve(cone(g), eik, K1, EvolveConfig(t_end=0.5))
        rg = radial_grid(201)
        tr1 = radial_evolve(ScalarField(rg, rg.axis(0) + 1.0), 1.0, EvolveConfig(t_end=0.5))
        r = rg.axis(0)
        err1 = np.abs(tr1.final.values - example_radial_profile(r, 0.5, 1.0))[r <= 4].max()
        ray = tr2.final.values[100:, 100]
        assert np.abs(ray - tr1.final.values[:101]).max() <= 3 * err1
