from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaquant.polytope import (
    FanData,
    LatticePolytope,
    PolytopeError,
    box,
    euclidean_volume,
    facet_lattice_volume,
    lattice_points,
    linear_moment,
    normal_fan,
    normalized_volume,
    polytope_from_fan,
    simplex,
    support_bounds,
)

import oracles

F = Fraction
SQUARE = box(1, 1)
TRI = simplex(2)
F1 = LatticePolytope([(0, 0), (2, 0), (3, 1), (0, 1)])


class TestVolume:
    def test_unit_simplex(self):
        assert normalized_volume(TRI) == 1

    def test_unit_square(self):
        assert normalized_volume(SQUARE) == 2

    def test_interval(self):
        assert normalized_volume(simplex(1, 3)) == 3

    def test_square_matches_shoelace(self):
        for P in (SQUARE, TRI, F1, box(2, 3)):
            assert euclidean_volume(P) == oracles.shoelace(P.vertices)

    def test_3d_cube_and_simplex(self):
        assert normalized_volume(box(1, 1, 1)) == 6
        assert normalized_volume(simplex(3, 2)) == 8

    def test_degenerate(self):
        with pytest.raises(PolytopeError, match="not full-dimensional"):
            LatticePolytope([(0, 0), (1, 1), (2, 2)])

    @pytest.mark.parametrize("c", [2, 3, 5])
    def test_scaling(self, c):
        for P in (TRI, F1, simplex(1, 2), box(1, 1, 1)):
            assert normalized_volume(P.dilate(c)) == c ** P.dimension * normalized_volume(P)

    def test_translation_invariance(self):
        assert normalized_volume(F1.translate((3, -7))) == normalized_volume(F1)


class TestLatticePoints:
    def test_interval(self):
        pts = lattice_points(simplex(1), 3)
        assert sorted(pts) == [(0,), (1,), (2,), (3,)]

    def test_simplex(self):
        assert sorted(lattice_points(TRI, 1)) == [(0, 0), (0, 1), (1, 0)]

    def test_square_m2(self):
        assert len(lattice_points(SQUARE, 2)) == 9

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_matches_scan_and_pick(self, m):
        for P in (TRI, F1, SQUARE, box(1, 2)):
            ours = {tuple(p) for p in lattice_points(P, m)}
            scan = {tuple(int(c) for c in p) for p in oracles.lattice_points_scan(P.vertices, m)}
            assert ours == scan
            assert len(ours) == oracles.pick_count(P.dilate(m).vertices)

    def test_ehrhart_polynomial(self):
        for P in (F1, simplex(3), simplex(1, 2)):
            n = P.dimension
            ms = np.arange(1, n + 2)
            counts = [len(lattice_points(P, int(m))) for m in ms]
            coef = np.polyfit(ms, counts, n)
            for m in range(n + 2, n + 5):
                assert round(np.polyval(coef, m)) == len(lattice_points(P, m))


class TestMoments:
    def test_square(self):
        assert linear_moment(SQUARE, (1, 0)) == F(1, 2)

    def test_simplex(self):
        assert linear_moment(TRI, (1, 0)) == F(1, 3)

    def test_interval(self):
        assert linear_moment(simplex(1, 2), (1,)) == 1

    def test_support_bounds(self):
        assert support_bounds(SQUARE, (1, 1)) == (0, 2)
        assert support_bounds(TRI, (-1, -1)) == (-1, 0)
        assert support_bounds(simplex(1, 3), (2,)) == (0, 6)

    @pytest.mark.parametrize("xi", [(1, 0), (0, 1), (-1, -1), (2, -3), (1, 5)])
    def test_against_slice_oracle(self, xi):
        for P in (TRI, F1, SQUARE, box(3, 1)):
            assert linear_moment(P, xi) == oracles.slice_mean(P.vertices, xi)

    def test_translation(self):
        xi, t = (2, -1), (5, 3)
        assert linear_moment(F1.translate(t), xi) == linear_moment(F1, xi) + 2 * 5 - 3

    def test_3d_cube(self):
        assert linear_moment(box(1, 1, 1), (1, 1, 1)) == F(3, 2)


class TestFan:
    def test_interval(self):
        assert set(normal_fan(simplex(1)).rays) == {(1,), (-1,)}

    def test_simplex(self):
        assert set(normal_fan(TRI).rays) == {(1, 0), (0, 1), (-1, -1)}

    def test_square(self):
        assert set(normal_fan(SQUARE).rays) == {(1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_smooth_flags(self):
        assert normal_fan(F1).is_smooth
        # Weighted projective plane P(1,1,2): one cone has determinant 2.
        wp = LatticePolytope([(0, 0), (2, 0), (0, 1)])
        assert not normal_fan(wp).is_smooth

    def test_round_trip(self):
        for P in (TRI, F1, SQUARE, simplex(3, 2), box(1, 2, 1)):
            fan = normal_fan(P)
            assert polytope_from_fan(fan, [f.offset for f in P.facets]) == P

    def test_incomplete_fan_rejected(self):
        with pytest.raises(PolytopeError, match="not complete"):
            FanData(2, ((1, 0), (0, 1), (-1, 0)), ((0, 1), (1, 2)))

    def test_non_primitive_ray_rejected(self):
        with pytest.raises(PolytopeError, match="primitive"):
            FanData(1, ((2,), (-1,)), ((0,), (1,)))

    def test_facet_lattice_volume(self):
        # Edges of F1 have lattice lengths 1, 2, 1, 3 (left, bottom, slanted, top).
        lengths = sorted(facet_lattice_volume(F1, k) for k in range(len(F1.facets)))
        assert lengths == [1, 1, 2, 3]


@st.composite
def lattice_polygons(draw):
    pts = draw(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=3, max_size=8))
    arr = np.asarray(pts)
    if np.linalg.matrix_rank(arr[1:] - arr[0]) < 2:
        pts = pts + [(pts[0][0] + 1, pts[0][1]), (pts[0][0], pts[0][1] + 1)]
    return LatticePolytope(pts)


@settings(max_examples=40, deadline=None)
@given(P=lattice_polygons(), xi=st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_moment_within_support(P, xi):
    lo, hi = support_bounds(P, xi)
    mean = linear_moment(P, xi)
    assert lo <= mean <= hi
    if any(xi):
        assert lo < mean < hi
        assert mean == oracles.slice_mean(P.vertices, xi)


@settings(max_examples=30, deadline=None)
@given(P=lattice_polygons())
def test_volume_and_points_match_oracles(P):
    assert euclidean_volume(P) == oracles.shoelace(P.vertices)
    assert len(lattice_points(P)) == oracles.pick_count(P.vertices)
