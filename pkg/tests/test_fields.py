import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcflow.fields import (
    GridSpec,
    ScalarField,
    central_gradient,
    central_gradients,
    godunov_magnitude,
    hessian,
    hessians,
    interpolate,
    line_samples,
    one_sided_differences,
    read_snapshot,
    upwind_gradient,
    write_snapshot,
)


def field_1d(fn, lo, hi, n):
    g = GridSpec((lo,), (hi,), (n,))
    return ScalarField(g, fn(g.axis(0)))


def field_2d(fn, lo, hi, n):
    g = GridSpec.uniform(lo, hi, n, dim=2)
    X, Y = g.mesh()
    return ScalarField(g, fn(X, Y))


class TestGridSpec:
    def test_spacing_and_axis(self):
        g = GridSpec((0.0, -1.0), (1.0, 1.0), (11, 5))
        assert g.spacing == pytest.approx((0.1, 0.5))
        assert g.h == pytest.approx(0.1)
        assert g.axis(1).tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
        assert g.size == 55

    @pytest.mark.parametrize("bad", [
        dict(lower=(0.0,), upper=(0.0,), counts=(5,)),
        dict(lower=(0.0,), upper=(1.0,), counts=(2,)),
        dict(lower=(0.0,) * 3, upper=(1.0,) * 3, counts=(3,) * 3),
        dict(lower=(0.0, 0.0), upper=(1.0,), counts=(3, 3)),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            GridSpec(**bad)

    @given(st.integers(3, 60), st.floats(-5, 5), st.floats(0.1, 10))
    def test_index_coordinate_roundtrip(self, n, lo, width):
        g = GridSpec((lo,), (lo + width,), (n,))
        for i in range(n):
            x = g.coordinate((i,))
            assert g.index_of(x) == (i,)

    def test_index_out_of_range(self):
        f = field_1d(lambda x: x, 0, 1, 5)
        with pytest.raises(IndexError):
            central_gradient(f, (7,))

    def test_boundary_mask(self):
        g = GridSpec.uniform(0, 1, 4)
        m = g.boundary_mask()
        assert m.sum() == 12 and not m[1, 1]


class TestScalarField:
    def test_rejects_nonfinite(self):
        g = GridSpec((0.0,), (1.0,), (3,))
        with pytest.raises(ValueError):
            ScalarField(g, np.array([0.0, np.nan, 1.0]))

    def test_rejects_wrong_size(self):
        g = GridSpec((0.0,), (1.0,), (3,))
        with pytest.raises(ValueError):
            ScalarField(g, np.zeros(4))

    def test_values_read_only(self):
        f = field_1d(lambda x: x, 0, 1, 3)
        with pytest.raises(ValueError):
            f.values[0] = 5.0


class TestCentralGradient:
    def test_constant(self):
        f = field_2d(lambda x, y: 3.0 + 0 * x, -1, 1, 9)
        assert central_gradient(f, (4, 4)).tolist() == [0.0, 0.0]

    def test_linear_exact(self):
        f = field_1d(lambda x: 2 * x, 0, 1, 11)
        assert central_gradient(f, (5,))[0] == pytest.approx(2.0, abs=1e-12)

    def test_quadratic_exact(self):
        # x = 0.5 is node 150 of 201 on [-1, 1]
        f = field_1d(lambda x: x * x, -1, 1, 201)
        assert central_gradient(f, (150,))[0] == pytest.approx(1.0, abs=1e-12)

    def test_boundary_uses_inward_difference(self):
        f = field_1d(lambda x: x * x, 0, 1, 11)
        assert central_gradient(f, (0,))[0] == pytest.approx(0.1)

    def test_vectorised_matches_pointwise(self, rng):
        g = GridSpec((0.0, 0.0), (1.0, 2.0), (7, 9))
        f = ScalarField(g, rng.normal(size=(7, 9)))
        G = central_gradients(f.values, g.spacing)
        for idx in np.ndindex(7, 9):
            np.testing.assert_allclose(G[idx], central_gradient(f, idx), rtol=0, atol=1e-12)


class TestHessian:
    def test_paraboloid(self):
        f = field_2d(lambda x, y: x**2 + y**2, -1, 1, 21)
        np.testing.assert_allclose(hessian(f, (7, 12)), 2 * np.eye(2), atol=1e-10)

    def test_bilinear(self):
        f = field_2d(lambda x, y: x * y, -1, 1, 21)
        np.testing.assert_allclose(hessian(f, (5, 9)), [[0, 1], [1, 0]], atol=1e-10)

    def test_quartic_taylor_bound(self):
        # x = 1 is node 100 of [0, 2] with h = 0.01; error ≤ 2h²
        f = field_1d(lambda x: x**4, 0, 2, 201)
        assert abs(hessian(f, (100,))[0, 0] - 12.0) <= 1e-2

    def test_symmetric_and_matches_pointwise(self, rng):
        g = GridSpec((0.0, 0.0), (1.0, 1.0), (6, 8))
        f = ScalarField(g, rng.normal(size=(6, 8)))
        H = hessians(f.values, g.spacing)
        np.testing.assert_array_equal(H, np.swapaxes(H, -1, -2))
        for idx in np.ndindex(6, 8):
            np.testing.assert_allclose(H[idx], hessian(f, idx), atol=1e-10)

    def test_boundary_rows_zero(self):
        f = field_2d(lambda x, y: x**2 + y**2, -1, 1, 5)
        H = hessian(f, (0, 2))
        assert H[0, 0] == 0 and H[0, 1] == 0 and H[1, 1] == pytest.approx(2.0)


class TestUpwind:
    def test_abs_away_from_kink(self):
        f = field_1d(np.abs, -1, 1, 21)
        assert upwind_gradient(f, (15,), +1) == pytest.approx(1.0)

    def test_constant(self):
        f = field_2d(lambda x, y: 0 * x + 2.0, -1, 1, 5)
        assert upwind_gradient(f, (2, 2), +1) == 0.0
        assert upwind_gradient(f, (2, 2), -1) == 0.0

    def test_kink_1d(self):
        # one-sided slopes at the minimum are D- = -1, D+ = +1
        f = field_1d(np.abs, -1, 1, 21)
        assert upwind_gradient(f, (10,), +1) == 0.0
        assert upwind_gradient(f, (10,), -1) == pytest.approx(math.sqrt(2))

    def test_cone_tip_2d(self):
        f = field_2d(lambda x, y: np.abs(x) + np.abs(y), -1, 1, 21)
        assert upwind_gradient(f, (10, 10), +1) == 0.0
        assert upwind_gradient(f, (10, 10), -1) == pytest.approx(2.0)

    def test_bad_sign(self):
        f = field_1d(np.abs, -1, 1, 5)
        with pytest.raises(ValueError):
            upwind_gradient(f, (2,), 0)

    def test_vectorised_matches_pointwise(self, rng):
        g = GridSpec((0.0, 0.0), (1.0, 1.0), (6, 7))
        f = ScalarField(g, rng.normal(size=(6, 7)))
        dm, dp = one_sided_differences(f.values, g.spacing)
        for s in (1, -1):
            G = godunov_magnitude(dm, dp, s)
            for idx in np.ndindex(6, 7):
                assert G[idx] == pytest.approx(upwind_gradient(f, idx, s), abs=1e-12)

    def test_first_order_convergence(self):
        errs = []
        for n in (41, 81, 161):
            f = field_2d(lambda x, y: np.sqrt(x * x + y * y + 1), -2, 2, n)
            dm, dp = one_sided_differences(f.values, f.grid.spacing)
            G = godunov_magnitude(dm, dp, +1)
            X, Y = f.grid.mesh()
            exact = np.sqrt(X**2 + Y**2) / np.sqrt(X**2 + Y**2 + 1)
            errs.append(np.abs(G - exact)[1:-1, 1:-1].max())
        rates = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(rates > 0.8)

    @given(st.lists(st.floats(-10, 10), min_size=5, max_size=30))
    def test_nonnegative(self, vals):
        g = GridSpec((0.0,), (1.0,), (len(vals),))
        dm, dp = one_sided_differences(np.array(vals), g.spacing)
        for s in (1, -1):
            assert np.all(godunov_magnitude(dm, dp, s) >= 0)


class TestInterpolation:
    def test_affine_reproduced(self, rng):
        f = field_2d(lambda x, y: 2 * x - 3 * y + 1, -1, 1, 11)
        pts = rng.uniform(-1, 1, size=(50, 2))
        np.testing.assert_allclose(interpolate(f, pts), 2 * pts[:, 0] - 3 * pts[:, 1] + 1, atol=1e-12)

    def test_line_samples_paraboloid(self):
        f = field_2d(lambda x, y: x**2 + y**2, -1, 1, 21)
        np.testing.assert_allclose(line_samples(f, (-1, 0), (1, 0), 3), [1, 0, 1], atol=1e-12)

    def test_hand_interpolation(self):
        f = field_1d(np.abs, -1, 1, 5)
        assert float(interpolate(f, 0.25)) == pytest.approx(0.25)

    def test_endpoints_on_nodes(self, rng):
        g = GridSpec.uniform(0, 1, 6)
        f = ScalarField(g, rng.normal(size=(6, 6)))
        s = line_samples(f, g.coordinate((1, 2)), g.coordinate((4, 5)), 4)
        assert s[0] == f.values[1, 2] and s[-1] == f.values[4, 5]

    def test_outside_box(self):
        f = field_1d(np.abs, -1, 1, 5)
        with pytest.raises(ValueError):
            line_samples(f, -2.0, 0.5, 3)
        with pytest.raises(ValueError):
            line_samples(f, -1.0, 0.5, 2)


def test_snapshot_roundtrip(tmp_path, rng):
    g = GridSpec((-1.0, 0.0), (1.0, 3.0), (5, 4))
    f = ScalarField(g, rng.normal(size=(5, 4)))
    p = tmp_path / "s.fld"
    write_snapshot(f, p)
    back = read_snapshot(p)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)
    lines = p.read_text().splitlines()
    assert lines[:4] == ["2", "5 4", "-1.0 0.0", "1.0 3.0"]


def test_snapshot_truncated(tmp_path):
    p = tmp_path / "bad.fld"
    p.write_text("1\n3\n0.0\n1.0\n0.0\n1.0\n")
    with pytest.raises(ValueError):
        read_snapshot(p)
