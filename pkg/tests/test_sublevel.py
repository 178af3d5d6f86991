import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcflow.fields import GridSpec, ScalarField
from qcflow.sublevel import ObstacleSet, SublevelMeasureIndex, build_index, measure_nonstrict, measure_strict


def cone(n, lo=-2.0, hi=2.0):
    g = GridSpec.uniform(lo, hi, n)
    return ScalarField(g, np.linalg.norm(g.points(), axis=-1) + 1.0)


def brute_strict(values, weight, h):
    return weight * np.sum(values < h)


class TestObstacleSet:
    def test_ball_measure(self):
        assert ObstacleSet.ball((0, 0), 2.0).measure_total == pytest.approx(4 * math.pi)
        assert ObstacleSet.ball((0,), 0.5).measure_total == pytest.approx(1.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ObstacleSet.ball((0, 0), 0.0)
        with pytest.raises(ValueError):
            ObstacleSet("polygon")

    def test_ball_outside_box(self):
        K = ObstacleSet.ball((1.5, 0), 1.0)
        with pytest.raises(ValueError):
            build_index(cone(21), K)

    def test_mask_measure(self):
        g = GridSpec.uniform(0, 1, 11)
        m = np.zeros((11, 11), bool)
        m[2:5, 3:7] = True
        K = ObstacleSet.from_mask(g, m)
        assert K.measure_total == pytest.approx(12 * 0.01)

    def test_mask_wrong_grid(self):
        g = GridSpec.uniform(0, 1, 11)
        K = ObstacleSet.from_mask(g, np.ones((11, 11), bool))
        with pytest.raises(ValueError):
            K.membership(GridSpec.uniform(0, 1, 12))


class TestIndex:
    def test_ball_total_within_perimeter_bound(self):
        f = cone(81)  # h = 0.05
        idx = build_index(f, ObstacleSet.ball((0, 0), 1.0))
        h = f.grid.h
        assert abs(idx.total - math.pi) <= 2 * (2 * math.pi) * h

    def test_empty_mask(self):
        g = GridSpec.uniform(0, 1, 5)
        idx = build_index(ScalarField(g, np.ones((5, 5))), ObstacleSet.from_mask(g, np.zeros((5, 5), bool)))
        assert len(idx) == 0 and idx.total == 0.0
        assert idx.measure_strict(10.0) == 0.0

    def test_single_cell(self):
        g = GridSpec.uniform(0, 1, 5)
        m = np.zeros((5, 5), bool)
        m[2, 3] = True
        idx = build_index(ScalarField(g, np.ones((5, 5))), ObstacleSet.from_mask(g, m))
        assert len(idx) == 1 and idx.total == pytest.approx(0.0625)

    def test_half_disk_level(self):
        f = cone(401)
        idx = build_index(f, ObstacleSet.ball((0, 0), 1.0))
        assert measure_strict(idx, 1.5) == pytest.approx(math.pi / 4, abs=0.02)

    def test_full_disk_level(self):
        f = cone(401)
        idx = build_index(f, ObstacleSet.ball((0, 0), 1.0))
        assert measure_strict(idx, 2.0) == pytest.approx(math.pi, abs=0.02)
        assert measure_nonstrict(idx, 2.0) == pytest.approx(math.pi, abs=0.02)

    def test_extremes(self):
        f = cone(41)
        idx = build_index(f, ObstacleSet.ball((0, 0), 1.0))
        assert idx.measure_strict(1.0) == 0.0
        assert idx.measure_strict(100.0) == idx.total

    def test_constant_tie(self):
        g = GridSpec.uniform(-2, 2, 41)
        idx = build_index(ScalarField(g, np.full((41, 41), 3.0)), ObstacleSet.ball((0, 0), 1.0))
        assert idx.measure_strict(3.0) == 0.0
        assert idx.measure_nonstrict(3.0) == idx.total

    def test_vectorised(self):
        idx = SublevelMeasureIndex([3.0, 1.0, 2.0], 0.5)
        np.testing.assert_array_equal(idx.measure_strict(np.array([1.0, 2.5, 9.0])), [0.0, 1.0, 1.5])

    def test_ball_accuracy_constant(self):
        consts = []
        for n in (41, 81, 161):
            f = cone(n)
            idx = build_index(f, ObstacleSet.ball((0, 0), 1.0))
            for lev in (1.3, 1.6, 1.9):
                rho = lev - 1.0
                consts.append(abs(idx.measure_strict(lev) - math.pi * rho**2) / (2 * math.pi * rho * f.grid.h))
        assert max(consts) <= 10


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40),
       st.lists(st.floats(-6, 6, allow_nan=False), min_size=2, max_size=10))
def test_monotone_and_sandwich(values, levels):
    v = np.round(np.array(values), 1)  # force ties
    idx = SublevelMeasureIndex(v, 0.25)
    levels = np.sort(np.round(np.array(levels), 1))
    s = idx.measure_strict(levels)
    ns = idx.measure_nonstrict(levels)
    assert np.all(np.diff(s) >= 0) and np.all(np.diff(ns) >= 0)
    ties = np.array([0.25 * np.sum(v == h) for h in levels])
    assert np.all(s <= ns)
    np.testing.assert_allclose(ns, s + ties, atol=1e-12)
    np.testing.assert_allclose(s, [brute_strict(v, 0.25, h) for h in levels], atol=1e-12)
    assert np.all((s >= 0) & (s <= idx.total + 1e-12))
