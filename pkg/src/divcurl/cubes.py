"""Dyadic cube indexing.

A cube is (level, index): it spans root.origin + root.side * 2^-level *
[index, index + 1] per axis.  The root side is a power of two and the
origin components are multiples of root.side / 8, so every corner is an
exact dyadic float and geometry is reproducible from the integers alone.
"""

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class RootBox:
    origin: tuple
    side: float
    n: int

    def cell_size(self, level):
        return self.side * 2.0 ** (-level)


@dataclass(frozen=True)
class DyadicCube:
    level: int
    index: tuple


def root_for_domain(dom, margin=1.25):
    """Smallest admissible root box with a complement band around the domain."""
    lo, hi = dom.bounding_box()
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    extent = float(np.max(hi - lo))
    center = (lo + hi) / 2.0
    side = 2.0 ** math.ceil(math.log2(extent * margin))
    while True:
        # origin on the side/16 lattice keeps all corners exactly dyadic
        step = side / 16.0
        origin = np.floor((center - side / 2.0) / step) * step
        if np.all(origin <= lo) and np.all(origin + side >= hi):
            return RootBox(origin=tuple(float(o) for o in origin), side=side, n=dom.n)
        side *= 2.0


def cube_bounds(root, cube):
    ell = root.cell_size(cube.level)
    lo = np.asarray(root.origin) + ell * np.asarray(cube.index, dtype=np.float64)
    return lo, lo + ell


def cube_center(root, cube):
    lo, hi = cube_bounds(root, cube)
    return (lo + hi) / 2.0


def cube_children(cube):
    n = len(cube.index)
    kids = []
    for off in range(2**n):
        idx = tuple(2 * cube.index[i] + ((off >> i) & 1) for i in range(n))
        kids.append(DyadicCube(cube.level + 1, idx))
    return kids


def cubes_touch(a, b):
    """Closed-cube intersection test in exact integer arithmetic."""
    lmax = max(a.level, b.level)
    sa = 1 << (lmax - a.level)
    sb = 1 << (lmax - b.level)
    for i in range(len(a.index)):
        a0 = a.index[i] * sa
        a1 = a0 + sa
        b0 = b.index[i] * sb
        b1 = b0 + sb
        if a1 < b0 or b1 < a0:
            return False
    return True


def boxes_box_distance(lo_a, hi_a, lo_b, hi_b):
    """Euclidean distance between two axis boxes (arrays broadcast)."""
    gap = np.maximum(lo_a - hi_b, lo_b - hi_a)
    gap = np.maximum(gap, 0.0)
    return np.sqrt(np.sum(gap * gap, axis=-1))
