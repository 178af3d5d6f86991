import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcflow.analysis import (
    comparison_experiment,
    grid_hausdorff,
    is_convex_1d_sections,
    is_quasiconvex,
    preservation_experiment,
    relabel_experiment,
    second_differences,
    sublevel_boundary,
)
from qcflow.evolve import EvolveConfig
from qcflow.fields import GridSpec, ScalarField, interpolate
from qcflow.operators import make_operator
from qcflow.oracles import example_field
from qcflow.sublevel import ObstacleSet

K1 = ObstacleSet.ball((0.0, 0.0), 1.0)
EIK = make_operator("nonlocal_eikonal", b=1.0, a_max=math.pi)


def line(lo, hi, n):
    return GridSpec((lo,), (hi,), (n,))


def radial(grid, fn):
    return ScalarField.from_function(grid, lambda p: fn(np.linalg.norm(p, axis=-1)))


class TestQuasiconvex:
    def test_abs(self):
        g = line(-2, 2, 41)
        rep = is_quasiconvex(ScalarField(g, np.abs(g.axis(0)) + 1))
        assert rep.passed and rep.worst_margin <= 0

    def test_double_well(self):
        g = line(-2, 2, 41)
        x = g.axis(0)
        rep = is_quasiconvex(ScalarField(g, np.minimum((x - 1) ** 2, (x + 1) ** 2) + 1))
        assert not rep.passed
        pts = np.array(rep.witnesses[0]["points"])
        assert pts[0, 0] < 0 < pts[1, 0] or pts[1, 0] < 0 < pts[0, 0]
        assert abs(pts[2, 0]) < 1.0

    def test_exact_solution(self):
        g = GridSpec.uniform(-4, 4, 101)
        f = example_field(g, 0.5, 1.0)
        assert is_quasiconvex(f, tol=2 * g.h).passed

    def test_exhaustive_flag(self):
        g = GridSpec.uniform(-1, 1, 9)
        f = radial(g, lambda r: r + 1)
        assert is_quasiconvex(f, exhaustive=True).passed

    def test_witnesses_reproduce(self):
        g = GridSpec.uniform(-2, 2, 33)
        x, y = g.mesh()
        f = ScalarField(g, np.minimum((x - 1) ** 2 + y**2, (x + 1) ** 2 + y**2) + 1)
        rep = is_quasiconvex(f)
        assert rep.witnesses
        for w in rep.witnesses:
            py, pz, px = (np.array(p) for p in w["points"])
            lam = w["lambda"]
            np.testing.assert_allclose(px, lam * py + (1 - lam) * pz, atol=1e-12)
            uy = f.values[g.index_of(py)]
            uz = f.values[g.index_of(pz)]
            ux = interpolate(f, px[None])[0]
            assert ux - max(uy, uz) == pytest.approx(w["margin"], abs=1e-12)

    @pytest.mark.parametrize("gfun", [np.sqrt, np.square, np.exp, lambda s: np.log1p(s), lambda s: s**3])
    def test_relabel_invariance(self, gfun):
        grid = GridSpec.uniform(-2, 2, 41)
        for fn in (lambda r: r + 1, lambda r: np.sqrt(r) + 1, lambda r: np.minimum(2 * r, r + 1) + 1):
            f = radial(grid, fn)
            assert is_quasiconvex(f).passed
            v = f.with_values(gfun(f.values))
            # bilinear interpolation of g∘u is only quasiconvex up to O(h²|D²(g∘u)|)
            noise = max(np.abs(second_differences(v, k)).max() for k in range(2)) * grid.h**2
            assert is_quasiconvex(v, tol=noise).passed

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=6))
    @settings(max_examples=30)
    def test_monotone_profiles_pass(self, slopes):
        # u = ψ(|x|) with ψ nondecreasing has convex sublevel sets
        grid = line(-2, 2, 33)
        x = np.abs(grid.axis(0))
        s = np.abs(np.asarray(slopes))
        psi = np.interp(x, np.linspace(0, 2, len(s)), np.cumsum(s))
        assert is_quasiconvex(ScalarField(grid, psi + 1), tol=1e-12).passed


class TestConvex:
    def test_square(self):
        g = line(-2, 2, 41)
        assert is_convex_1d_sections(ScalarField(g, g.axis(0) ** 2)).passed

    def test_abs(self):
        g = GridSpec.uniform(-2, 2, 41)
        assert is_convex_1d_sections(radial(g, lambda r: r)).passed

    def test_exact_solution_concave_interior(self):
        g = line(0, 4, 401)
        r = g.axis(0)
        f = ScalarField(g, r / (1 + math.pi * r * 0.5) + 1)
        rep = is_convex_1d_sections(f, tol=1.0)
        assert not rep.passed
        assert 0 < rep.witnesses[0]["points"][1][0] < 1

    def test_second_differences(self):
        g = line(0, 1, 11)
        d2 = second_differences(ScalarField(g, g.axis(0) ** 2), 0)
        np.testing.assert_allclose(d2, 2.0)

    def test_mask(self):
        g = line(-2, 2, 41)
        x = g.axis(0)
        f = ScalarField(g, np.where(np.abs(x) < 1, -x**2, 0.0) + 5)
        assert not is_convex_1d_sections(f).passed
        assert is_convex_1d_sections(f, mask=np.abs(x) > 1.5).passed


class TestPreservation:
    def test_eikonal_example(self):
        g = GridSpec.uniform(-4, 4, 81)
        u0 = radial(g, lambda r: r + 1)
        res = preservation_experiment(u0, EIK, K1, EvolveConfig(t_end=0.5), times=(0.1, 0.25, 0.5))
        assert res.quasiconvex_everywhere
        assert res.qc_tol == pytest.approx(4 * g.h)
        assert not res.rows[-1].convexity.passed
        assert res.to_dict()["rows"][0]["time"] == 0.1

    def test_viscous_local_problem(self):
        g = GridSpec.uniform(-3, 3, 41)
        u0 = radial(g, lambda r: np.minimum(2 * r, r + 1) + 1)
        op = make_operator("viscous_hj", a_coef=1.0, alpha=0.5)
        res = preservation_experiment(u0, op, None, EvolveConfig(t_end=0.1), times=(0.05, 0.1))
        assert res.quasiconvex_everywhere

    def test_rejects_nonquasiconvex_start(self):
        g = GridSpec.uniform(-2, 2, 41)
        x, y = g.mesh()
        u0 = ScalarField(g, np.minimum((x - 1) ** 2, (x + 1) ** 2) + y**2 + 1)
        with pytest.raises(ValueError):
            preservation_experiment(u0, EIK, K1, EvolveConfig(t_end=0.1))


class TestComparison:
    def setup_method(self):
        self.g = GridSpec.uniform(-3, 3, 41)
        self.u0 = radial(self.g, lambda r: r + 1)
        self.cfg = EvolveConfig(t_end=0.3)

    def test_shift(self):
        v0 = self.u0.with_values(self.u0.values + 0.5)
        assert comparison_experiment(self.u0, v0, EIK, K1, self.cfg) <= 0.0

    def test_smooth_cone(self):
        v0 = radial(self.g, lambda r: np.sqrt(r * r + 1) + 1.2)
        assert comparison_experiment(self.u0, v0, EIK, K1, self.cfg) <= 1e-12

    def test_equal(self):
        assert comparison_experiment(self.u0, self.u0, EIK, K1, self.cfg) == 0.0

    def test_precondition(self):
        v0 = self.u0.with_values(self.u0.values - 0.1)
        with pytest.raises(ValueError):
            comparison_experiment(self.u0, v0, EIK, K1, self.cfg)


class TestRelabel:
    def setup_method(self):
        self.g = GridSpec.uniform(-4, 4, 81)
        self.u0 = radial(self.g, lambda r: r + 1)
        self.cfg = EvolveConfig(t_end=0.5, snapshot_times=(0.25,))

    def test_identity(self):
        rep = relabel_experiment(self.u0, lambda s: s, lambda s: s, EIK, K1, self.cfg, [1.5, 2.0])
        assert rep.worst_margin == 0.0 and rep.passed

    def test_square(self):
        rep = relabel_experiment(self.u0, np.square, np.sqrt, EIK, K1, self.cfg, [1.5**2])
        assert rep.passed and rep.tolerance == pytest.approx(2 * self.g.h)

    def test_sqrt(self):
        rep = relabel_experiment(self.u0, np.sqrt, np.square, EIK, K1, self.cfg, [math.sqrt(1.5), math.sqrt(2.5)])
        assert rep.passed
        assert len(rep.extra["table"]) == 3 * 2

    def test_non_geometric(self):
        op = make_operator("viscous_hj")
        with pytest.raises(ValueError):
            relabel_experiment(self.u0, np.sqrt, np.square, op, None, self.cfg, [1.5])


def test_hausdorff():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 0.5]])
    assert grid_hausdorff(a, b) == pytest.approx(math.hypot(1, 0.5))
    assert grid_hausdorff(a[:0], b[:0]) == 0.0
    assert grid_hausdorff(a, b[:0]) == math.inf


def test_sublevel_boundary_circle():
    g = GridSpec.uniform(-2, 2, 81)
    f = radial(g, lambda r: r)
    pts = sublevel_boundary(f, 1.0)
    r = np.linalg.norm(pts, axis=-1)
    assert r.max() < 1.0 and r.min() > 1.0 - 2 * g.h
