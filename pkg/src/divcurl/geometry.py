"""Exact polygon constructions for the domain gallery.

Coordinates live in the field Q(sqrt(3)): each scalar is a pair (a, b) of
Fractions meaning a + b*sqrt(3).  The Koch iteration only needs halving,
thirds and +-60 degree rotations, so vertices stay exact at every level and
are rounded to float64 once.  The exact form also powers the slow
ray-casting oracle used to validate the float kernels.
"""

from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

SQRT3 = math.sqrt(3.0)

_F0 = Fraction(0)


def q3(a, b=0):
    return (Fraction(a), Fraction(b))


def q3_add(u, v):
    return (u[0] + v[0], u[1] + v[1])


def q3_sub(u, v):
    return (u[0] - v[0], u[1] - v[1])


def q3_mul(u, v):
    # (a + b r)(c + d r) with r^2 = 3
    return (u[0] * v[0] + 3 * u[1] * v[1], u[0] * v[1] + u[1] * v[0])


def q3_scale(u, s):
    s = Fraction(s)
    return (u[0] * s, u[1] * s)


def q3_inv(u):
    den = u[0] * u[0] - 3 * u[1] * u[1]
    if den == 0:
        raise ZeroDivisionError("not invertible in Q(sqrt3)")
    return (u[0] / den, -u[1] / den)


def q3_sign(u):
    """Exact sign of a + b*sqrt(3)."""
    a, b = u
    if b == 0:
        return (a > 0) - (a < 0)
    if a == 0:
        return (b > 0) - (b < 0)
    if a > 0 and b > 0:
        return 1
    if a < 0 and b < 0:
        return -1
    # opposite signs: compare a^2 with 3 b^2
    if a * a > 3 * b * b:
        return (a > 0) - (a < 0)
    return (b > 0) - (b < 0)


def q3_lt(u, v):
    return q3_sign(q3_sub(u, v)) < 0


def q3_le(u, v):
    return q3_sign(q3_sub(u, v)) <= 0


def q3_float(u):
    return float(u[0]) + float(u[1]) * SQRT3


def _rot60(p, ccw):
    # rotate (x, y) by +-60 degrees; cos = 1/2, sin = sqrt(3)/2
    x, y = p
    half_x = q3_scale(x, Fraction(1, 2))
    half_y = q3_scale(y, Fraction(1, 2))
    # sqrt(3)/2 * (a + b r) = (3b/2) + (a/2) r
    sx = (x[1] * Fraction(3, 2), x[0] * Fraction(1, 2))
    sy = (y[1] * Fraction(3, 2), y[0] * Fraction(1, 2))
    if ccw:
        return (q3_sub(half_x, sy), q3_add(sx, half_y))
    return (q3_add(half_x, sy), q3_sub(half_y, sx))


def _pt_add(p, q):
    return (q3_add(p[0], q[0]), q3_add(p[1], q[1]))


def _pt_sub(p, q):
    return (q3_sub(p[0], q[0]), q3_sub(p[1], q[1]))


def _pt_scale(p, s):
    return (q3_scale(p[0], s), q3_scale(p[1], s))


@lru_cache(maxsize=None)
def koch_snowflake_exact(level):
    """Exact vertex loop (CCW) of the Koch snowflake prefractal.

    Level 0 is the unit-side equilateral triangle (0,0), (1,0), (1/2, r/2);
    each level replaces every edge by four, bumping outward.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    pts = [
        ((_F0, _F0), (_F0, _F0)),
        ((Fraction(1), _F0), (_F0, _F0)),
        ((Fraction(1, 2), _F0), (_F0, Fraction(1, 2))),
    ]
    third = Fraction(1, 3)
    for _ in range(level):
        nxt = []
        m = len(pts)
        for i in range(m):
            p = pts[i]
            q = pts[(i + 1) % m]
            step = _pt_scale(_pt_sub(q, p), third)
            p1 = _pt_add(p, step)
            p2 = _pt_add(p1, step)
            # outward peak: traversal is CCW, interior on the left, so the
            # bump rotates the step clockwise
            peak = _pt_add(p1, _rot60(step, ccw=False))
            nxt.extend([p, p1, peak, p2])
        pts = nxt
    return tuple(pts)


def polygon_to_float(exact_pts):
    return np.array([[q3_float(p[0]), q3_float(p[1])] for p in exact_pts], dtype=np.float64)


@lru_cache(maxsize=None)
def koch_snowflake_polygon(level):
    return polygon_to_float(koch_snowflake_exact(level))


def square_exact():
    one = Fraction(1)
    return tuple(
        ((Fraction(x), _F0), (Fraction(y), _F0))
        for x, y in [(0, 0), (one, 0), (one, one), (0, one)]
    )


def lshape_exact():
    h = Fraction(1, 2)
    coords = [(0, 0), (1, 0), (1, h), (h, h), (h, 1), (0, 1)]
    return tuple(((Fraction(x), _F0), (Fraction(y), _F0)) for x, y in coords)


def polygon_area(poly):
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_perimeter(poly):
    d = np.roll(poly, -1, axis=0) - poly
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def point_in_polygon_exact(exact_pts, x, y):
    """Even-odd test with exact Q(sqrt3) arithmetic (test oracle).

    x, y: exact rationals (Fraction); returns the same half-open crossing
    rule as the float kernels.
    """
    px = (Fraction(x), _F0)
    py = (Fraction(y), _F0)
    m = len(exact_pts)
    cross = 0
    for i in range(m):
        (x1, y1) = exact_pts[i]
        (x2, y2) = exact_pts[(i + 1) % m]
        below1 = q3_le(y1, py)
        below2 = q3_le(y2, py)
        if below1 != below2:
            # x-intercept of the edge at height py
            t = q3_mul(q3_sub(py, y1), q3_inv(q3_sub(y2, y1)))
            xint = q3_add(x1, q3_mul(t, q3_sub(x2, x1)))
            if q3_lt(px, xint):
                cross += 1
    return bool(cross % 2)


def koch_area_exact(level):
    """Closed-form area of the level-k snowflake (unit side)."""
    a0 = SQRT3 / 4.0
    if level == 0:
        return a0
    # each level adds 3*4^(i-1) triangles of side 3^-i
    extra = sum(3 * 4 ** (i - 1) * a0 * 9.0 ** (-i) for i in range(1, level + 1))
    return a0 + extra
