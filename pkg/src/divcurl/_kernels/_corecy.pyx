# Compiled geometry kernels: even-odd ray casting and exact minimum
# distances from points / axis-aligned boxes to a polygon edge loop.
# Contracts mirror _ref.py; parity is enforced by the test suite.

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fmax, fmin, sqrt

cnp.import_array()

IMPL = "cython"


def points_in_polygon(pts, poly):
    cdef double[:, ::1] p = np.ascontiguousarray(pts, dtype=np.float64)
    cdef double[:, ::1] v = np.ascontiguousarray(poly, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], m = v.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double px, py, x1, y1, x2, y2
    cdef int cross
    with nogil:
        for i in range(n):
            px = p[i, 0]
            py = p[i, 1]
            cross = 0
            for j in range(m):
                k = j + 1
                if k == m:
                    k = 0
                x1 = v[j, 0]; y1 = v[j, 1]
                x2 = v[k, 0]; y2 = v[k, 1]
                if (y1 <= py) != (y2 <= py):
                    if px < x1 + (py - y1) * (x2 - x1) / (y2 - y1):
                        cross += 1
            o[i] = cross & 1
    return out.astype(bool)


cdef inline double _seg_d2(double px, double py, double ax, double ay,
                           double bx, double by) noexcept nogil:
    cdef double abx = bx - ax, aby = by - ay
    cdef double apx = px - ax, apy = py - ay
    cdef double ab2 = abx * abx + aby * aby
    cdef double t
    if ab2 > 0.0:
        t = (apx * abx + apy * aby) / ab2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    else:
        t = 0.0
    cdef double dx = apx - t * abx, dy = apy - t * aby
    return dx * dx + dy * dy


def points_boundary_distance(pts, poly):
    cdef double[:, ::1] p = np.ascontiguousarray(pts, dtype=np.float64)
    cdef double[:, ::1] v = np.ascontiguousarray(poly, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], m = v.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double best, d2
    with nogil:
        for i in range(n):
            best = INFINITY
            for j in range(m):
                k = j + 1
                if k == m:
                    k = 0
                d2 = _seg_d2(p[i, 0], p[i, 1], v[j, 0], v[j, 1], v[k, 0], v[k, 1])
                if d2 < best:
                    best = d2
            o[i] = sqrt(best)
    return out


cdef inline double _pt_box_d2(double px, double py, double lx, double ly,
                              double hx, double hy) noexcept nogil:
    cdef double dx = fmax(fmax(lx - px, px - hx), 0.0)
    cdef double dy = fmax(fmax(ly - py, py - hy), 0.0)
    return dx * dx + dy * dy


cdef inline bint _seg_hits_box(double ax, double ay, double bx, double by,
                               double lx, double ly, double hx, double hy) noexcept nogil:
    # Liang-Barsky slab clip of segment a->b against the box
    cdef double t0 = 0.0, t1 = 1.0
    cdef double d, tl, th, tmp
    cdef int axis
    for axis in range(2):
        if axis == 0:
            d = bx - ax
            tl = lx - ax
            th = hx - ax
        else:
            d = by - ay
            tl = ly - ay
            th = hy - ay
        if d == 0.0:
            if tl > 0.0 or th < 0.0:
                return False
        else:
            tl /= d
            th /= d
            if tl > th:
                tmp = tl; tl = th; th = tmp
            if tl > t0:
                t0 = tl
            if th < t1:
                t1 = th
            if t0 > t1:
                return False
    return True


def boxes_boundary_distance(lo, hi, poly):
    cdef double[:, ::1] l = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:, ::1] h = np.ascontiguousarray(hi, dtype=np.float64)
    cdef double[:, ::1] v = np.ascontiguousarray(poly, dtype=np.float64)
    cdef Py_ssize_t n = l.shape[0], m = v.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double best, d2, lx, ly, hx, hy, ax, ay, bx, by
    with nogil:
        for i in range(n):
            lx = l[i, 0]; ly = l[i, 1]
            hx = h[i, 0]; hy = h[i, 1]
            best = INFINITY
            for j in range(m):
                k = j + 1
                if k == m:
                    k = 0
                ax = v[j, 0]; ay = v[j, 1]
                bx = v[k, 0]; by = v[k, 1]
                if _seg_hits_box(ax, ay, bx, by, lx, ly, hx, hy):
                    best = 0.0
                    break
                d2 = _seg_d2(lx, ly, ax, ay, bx, by)
                d2 = fmin(d2, _seg_d2(lx, hy, ax, ay, bx, by))
                d2 = fmin(d2, _seg_d2(hx, ly, ax, ay, bx, by))
                d2 = fmin(d2, _seg_d2(hx, hy, ax, ay, bx, by))
                d2 = fmin(d2, _pt_box_d2(ax, ay, lx, ly, hx, hy))
                d2 = fmin(d2, _pt_box_d2(bx, by, lx, ly, hx, hy))
                if d2 < best:
                    best = d2
            o[i] = sqrt(best)
    return out
