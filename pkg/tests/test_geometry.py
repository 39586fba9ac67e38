"""Exact polygon kernel: quadratic-field arithmetic and Koch constructions."""

import math

import numpy as np
import pytest

from divcurl import geometry as geo


class TestQuadraticField:
    def test_multiplication(self):
        # (1 + sqrt(3))^2 = 4 + 2 sqrt(3)
        assert geo.q3_mul(geo.q3(1, 1), geo.q3(1, 1)) == geo.q3(4, 2)

    def test_add_sub_roundtrip(self):
        u, v = geo.q3(3, -2), geo.q3(-1, 5)
        assert geo.q3_sub(geo.q3_add(u, v), v) == u

    def test_inverse(self):
        u = geo.q3(2, 1)
        prod = geo.q3_mul(u, geo.q3_inv(u))
        assert prod == geo.q3(1, 0)

    def test_sign_matches_float(self):
        cases = [geo.q3(-2, 1), geo.q3(2, -1), geo.q3(0, 0), geo.q3(-7, 4), geo.q3(7, -4)]
        for u in cases:
            f = geo.q3_float(u)
            expect = 0 if f == 0 else (1 if f > 0 else -1)
            assert geo.q3_sign(u) == expect

    def test_ordering_consistent_with_float(self):
        vals = [geo.q3(0, 0), geo.q3(1, 0), geo.q3(0, 1), geo.q3(2, -1), geo.q3(-1, 1)]
        for u in vals:
            for v in vals:
                assert geo.q3_lt(u, v) == (geo.q3_float(u) < geo.q3_float(v))

    def test_scale(self):
        assert geo.q3_scale(geo.q3(1, 2), 3) == geo.q3(3, 6)


class TestKochPolygon:
    def test_vertex_counts(self):
        for level in range(5):
            pts = geo.koch_snowflake_exact(level)
            assert len(pts) == 3 * 4**level

    def test_area_matches_shoelace(self):
        for level in range(4):
            exact = geo.koch_area_exact(level)
            shoelace = geo.polygon_area(geo.koch_snowflake_polygon(level))
            assert abs(exact - shoelace) <= 1.2e-16 * max(1.0, abs(exact))

    def test_area_recursion(self):
        # each level adds 3*4^(k-1) triangles of side 3^-k
        for level in range(1, 5):
            prev = geo.koch_area_exact(level - 1)
            added = 3 * 4 ** (level - 1) * (math.sqrt(3) / 4.0) * (3.0**-level) ** 2
            assert geo.koch_area_exact(level) == pytest.approx(prev + added, rel=1e-12)

    def test_perimeter_grows_by_four_thirds(self):
        for level in range(5):
            per = geo.polygon_perimeter(geo.koch_snowflake_polygon(level))
            assert per == pytest.approx(3.0 * (4.0 / 3.0) ** level, rel=1e-12)

    def test_triangle_base_case(self):
        poly = geo.koch_snowflake_polygon(0)
        assert poly.shape == (3, 2)
        assert geo.polygon_area(poly) == pytest.approx(math.sqrt(3) / 4.0, rel=1e-12)


class TestPointInPolygonExact:
    def test_square_classification(self):
        sq = geo.square_exact()
        assert geo.point_in_polygon_exact(sq, 0.5, 0.5)
        assert geo.point_in_polygon_exact(sq, 0.25, 0.75)
        assert not geo.point_in_polygon_exact(sq, 1.5, 0.5)
        assert not geo.point_in_polygon_exact(sq, 0.5, -0.25)
        assert not geo.point_in_polygon_exact(sq, -3.0, 0.5)

    def test_lshape_notch(self):
        ls = geo.lshape_exact()
        xs = geo.polygon_to_float(ls)
        lo, hi = xs.min(axis=0), xs.max(axis=0)
        # the notch corner region lies inside the bounding box but outside
        mid = 0.5 * (lo + hi)
        inside_count = sum(
            geo.point_in_polygon_exact(ls, x, y)
            for x in np.linspace(lo[0] + 0.05, hi[0] - 0.05, 7)
            for y in np.linspace(lo[1] + 0.05, hi[1] - 0.05, 7)
        )
        assert 0 < inside_count < 49
        assert isinstance(geo.point_in_polygon_exact(ls, mid[0], mid[1]), bool)

    def test_koch_centroid_inside(self):
        for level in range(3):
            pts = geo.koch_snowflake_exact(level)
            assert geo.point_in_polygon_exact(pts, 0.5, math.sqrt(3) / 6.0)
