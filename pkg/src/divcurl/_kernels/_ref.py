"""Vectorized NumPy fallback for the geometry kernels.

Same contracts as the compiled module: even-odd ray casting, exact minimum
distance from points to a segment loop, and exact minimum distance from
axis-aligned boxes to a segment loop.  Work is chunked so the broadcast
temporaries stay bounded regardless of input size.
"""

import numpy as np

IMPL = "numpy"

# target number of (point, segment) cells per broadcast chunk
_CELLS = 4_000_000


def _chunks(n, m):
    step = max(1, _CELLS // max(m, 1))
    for i in range(0, n, step):
        yield i, min(i + step, n)


def points_in_polygon(pts, poly):
    """Even-odd membership of points in a closed polygon.

    pts: (N, 2) float64, poly: (M, 2) float64 vertex loop (edge i -> i+1 mod M).
    Points exactly on an edge are classified by the half-open crossing rule.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    poly = np.ascontiguousarray(poly, dtype=np.float64)
    x1 = poly[:, 0]
    y1 = poly[:, 1]
    x2 = np.roll(poly[:, 0], -1)
    y2 = np.roll(poly[:, 1], -1)
    dy = y2 - y1
    # horizontal edges never satisfy the half-open rule; the guarded slope
    # value is irrelevant there
    slope = np.where(dy != 0.0, (x2 - x1) / np.where(dy != 0.0, dy, 1.0), 0.0)
    out = np.empty(len(pts), dtype=bool)
    for i0, i1 in _chunks(len(pts), len(poly)):
        px = pts[i0:i1, 0][:, None]
        py = pts[i0:i1, 1][:, None]
        straddles = (y1 <= py) != (y2 <= py)
        xint = x1 + (py - y1) * slope
        out[i0:i1] = (np.count_nonzero(straddles & (px < xint), axis=1) % 2).astype(bool)
    return out


def points_boundary_distance(pts, poly):
    """Minimum Euclidean distance from each point to the polygon edges."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    poly = np.ascontiguousarray(poly, dtype=np.float64)
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ab2 = np.where(ab2 > 0.0, ab2, 1.0)
    out = np.empty(len(pts), dtype=np.float64)
    for i0, i1 in _chunks(len(pts), len(poly)):
        p = pts[i0:i1]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("nmj,mj->nm", ap, ab) / ab2, 0.0, 1.0)
        d = ap - t[:, :, None] * ab[None, :, :]
        out[i0:i1] = np.sqrt(np.min(np.einsum("nmj,nmj->nm", d, d), axis=1))
    return out


def boxes_boundary_distance(lo, hi, poly):
    """Exact minimum distance from axis-aligned boxes to the polygon edges.

    For a box and a segment (both convex) the minimum over disjoint pairs is
    attained at a box corner or a segment endpoint; intersecting pairs get
    distance zero via a slab clip test.
    """
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    poly = np.ascontiguousarray(poly, dtype=np.float64)
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ab2s = np.where(ab2 > 0.0, ab2, 1.0)
    n = len(lo)
    out = np.empty(n, dtype=np.float64)
    for i0, i1 in _chunks(n, 4 * len(poly)):
        l = lo[i0:i1]
        h = hi[i0:i1]
        best = np.full(i1 - i0, np.inf)
        # box corners to segments
        for cx, cy in ((0, 0), (0, 1), (1, 0), (1, 1)):
            corner = np.stack([(l, h)[cx][:, 0], (l, h)[cy][:, 1]], axis=1)
            ap = corner[:, None, :] - a[None, :, :]
            t = np.clip(np.einsum("nmj,mj->nm", ap, ab) / ab2s, 0.0, 1.0)
            d = ap - t[:, :, None] * ab[None, :, :]
            best = np.minimum(best, np.min(np.einsum("nmj,nmj->nm", d, d), axis=1))
        # segment endpoints to boxes
        for pt in (a, b):
            gap = np.maximum(l[:, None, :] - pt[None, :, :], 0.0)
            gap = np.maximum(gap, pt[None, :, :] - h[:, None, :])
            best = np.minimum(best, np.min(np.einsum("nmj,nmj->nm", gap, gap), axis=1))
        # zero out intersecting pairs (slab clip of the segment by the box)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (l[:, None, :] - a[None, :, :]) / ab[None, :, :]
            t_hi = (h[:, None, :] - a[None, :, :]) / ab[None, :, :]
        t_near = np.minimum(t_lo, t_hi)
        t_far = np.maximum(t_lo, t_hi)
        # axes where the segment is parallel: inside the slab -> free, outside -> never
        par = ab[None, :, :] == 0.0
        inside = (a[None, :, :] >= l[:, None, :]) & (a[None, :, :] <= h[:, None, :])
        t_near = np.where(par, np.where(inside, -np.inf, np.inf), t_near)
        t_far = np.where(par, np.where(inside, np.inf, -np.inf), t_far)
        enter = np.maximum(np.max(t_near, axis=2), 0.0)
        exit_ = np.minimum(np.min(t_far, axis=2), 1.0)
        hit = np.any(enter <= exit_, axis=1)
        out[i0:i1] = np.where(hit, 0.0, np.sqrt(best))
    return out
