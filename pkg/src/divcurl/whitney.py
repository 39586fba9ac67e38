"""Whitney decomposition of the domain interior or of its complement.

Top-down refinement over the dyadic tree of the root box.  A candidate
cube S with edge l is accepted as soon as its exact set distance to the
boundary satisfies dist(S) >= sqrt(n) * l and its (then well-defined) side
matches the requested one.  Rejected cubes are split until max_level;
unresolved boundary cells go to the truncation ledger.

Accepted cubes provably satisfy the two-sided distance bound
1 <= dist/l <= 4*sqrt(n) and the touching-neighbor size ratio <= 4: a
child's distance is below the parent's rejection threshold plus the parent
diameter, which caps dist at (2+2)*sqrt(n)*l, and combining the bounds of
two touching cubes caps their size ratio at 5, hence 4 among powers of two.
"""

from dataclasses import dataclass, field
from itertools import product
import json

import numpy as np

from .cubes import DyadicCube, RootBox, cube_bounds, root_for_domain


@dataclass
class WhitneyDecomposition:
    root: RootBox
    side: str
    max_level: int
    cubes: list
    dist: np.ndarray
    truncation: dict
    domain_tag: str
    _adjacency: list | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.cubes)

    @property
    def n(self):
        return self.root.n

    def ell(self, pos):
        return self.root.cell_size(self.cubes[pos].level)

    def ells(self):
        levels = np.array([c.level for c in self.cubes])
        return self.root.side * 2.0 ** (-levels.astype(np.float64))

    def bounds(self):
        n = self.n
        lo = np.empty((len(self.cubes), n))
        hi = np.empty((len(self.cubes), n))
        for i, c in enumerate(self.cubes):
            lo[i], hi[i] = cube_bounds(self.root, c)
        return lo, hi

    def centers(self):
        lo, hi = self.bounds()
        return (lo + hi) / 2.0

    @property
    def adjacency(self):
        if self._adjacency is None:
            self._adjacency = _build_adjacency(self.cubes)
        return self._adjacency

    def index_map(self):
        return {(c.level, c.index): i for i, c in enumerate(self.cubes)}

    def locate(self, x):
        """Position of the cube containing point x, or None."""
        x = np.asarray(x, dtype=np.float64)
        key = self.index_map() if not hasattr(self, "_keymap") else self._keymap
        self._keymap = key
        origin = np.asarray(self.root.origin)
        for lev in sorted({c.level for c in self.cubes}):
            ell = self.root.cell_size(lev)
            idx = tuple(int(v) for v in np.floor((x - origin) / ell))
            pos = key.get((lev, idx))
            if pos is not None:
                return pos
        return None


def whitney_decompose(dom, side, max_level, root=None):
    """Whitney cubes of the open interior or complement, up to max_level."""
    if side not in ("interior", "complement"):
        raise ValueError("side must be 'interior' or 'complement'")
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    if root is None:
        root = root_for_domain(dom)
    n = dom.n
    sqrt_n = np.sqrt(float(n))
    origin = np.asarray(root.origin)

    accepted = []
    accepted_dist = []
    trunc_count = 0
    trunc_volume = 0.0
    trunc_sides = {"interior": 0, "complement": 0, "crossing": 0}

    idx = np.zeros((1, n), dtype=np.int64)
    for level in range(0, max_level + 1):
        if len(idx) == 0:
            break
        ell = root.cell_size(level)
        lo = origin[None, :] + ell * idx.astype(np.float64)
        hi = lo + ell
        dist = dom.boxes_boundary_distance(lo, hi)
        clear = dist >= sqrt_n * ell
        positive = dist > 0.0
        member = dom.membership((lo + hi) / 2.0)
        on_side = member if side == "interior" else ~member
        accept = clear & on_side
        subdivide = ~clear & (on_side | ~positive)
        if level == max_level:
            k = int(np.count_nonzero(subdivide))
            if k:
                trunc_count += k
                trunc_volume += k * ell**n
                crossing = subdivide & ~positive
                trunc_sides["crossing"] += int(np.count_nonzero(crossing))
                own = subdivide & positive
                key = "interior" if side == "interior" else "complement"
                trunc_sides[key] += int(np.count_nonzero(own))
            subdivide[:] = False
        for row, d in zip(idx[accept], dist[accept]):
            accepted.append(DyadicCube(level, tuple(int(v) for v in row)))
            accepted_dist.append(float(d))
        if np.any(subdivide):
            parents = idx[subdivide]
            offs = np.array(list(product((0, 1), repeat=n)), dtype=np.int64)
            idx = (parents[:, None, :] * 2 + offs[None, :, :]).reshape(-1, n)
        else:
            idx = np.zeros((0, n), dtype=np.int64)

    order = sorted(range(len(accepted)), key=lambda i: (accepted[i].level, accepted[i].index))
    cubes = [accepted[i] for i in order]
    dist_arr = np.array([accepted_dist[i] for i in order], dtype=np.float64)
    return WhitneyDecomposition(
        root=root,
        side=side,
        max_level=max_level,
        cubes=cubes,
        dist=dist_arr,
        truncation={
            "count": trunc_count,
            "volume": trunc_volume,
            "cell_size": root.cell_size(max_level),
            "sides": trunc_sides,
        },
        domain_tag=dom.tag,
    )


def _build_adjacency(cubes):
    """Complete touching-pair graph via ancestor-cell lookups.

    Every pair of touching cubes (A coarser or equal than B) is discovered
    from B by probing the 3^n cells around B's ancestor at A's level, so no
    size-ratio assumption enters.
    """
    index = {(c.level, c.index): i for i, c in enumerate(cubes)}
    levels = sorted({c.level for c in cubes})
    n = len(cubes[0].index) if cubes else 0
    offs = list(product((-1, 0, 1), repeat=n))
    adj = [[] for _ in cubes]
    seen = set()
    for i, c in enumerate(cubes):
        for lev in levels:
            if lev > c.level:
                break
            shift = c.level - lev
            anc = tuple(k >> shift for k in c.index)
            for off in offs:
                key = (lev, tuple(anc[d] + off[d] for d in range(n)))
                j = index.get(key)
                if j is None or j == i:
                    continue
                pair = (i, j) if i < j else (j, i)
                if pair in seen:
                    continue
                if _touch(c, cubes[j]):
                    seen.add(pair)
                    adj[i].append(j)
                    adj[j].append(i)
    for lst in adj:
        lst.sort()
    return adj


def _touch(a, b):
    lmax = max(a.level, b.level)
    sa = 1 << (lmax - a.level)
    sb = 1 << (lmax - b.level)
    for i in range(len(a.index)):
        if a.index[i] * sa + sa < b.index[i] * sb or b.index[i] * sb + sb < a.index[i] * sa:
            return False
    return True


def small_cube_threshold(epsilon, delta, n):
    return epsilon * delta / (16.0 * n)


def select_w3(w2, epsilon, delta):
    """Positions of the small complement cubes: l <= epsilon*delta/(16 n)."""
    if w2.side != "complement":
        raise ValueError("select_w3 expects the complement decomposition")
    threshold = small_cube_threshold(epsilon, delta, w2.n)
    ells = w2.ells()
    return [i for i in range(len(w2)) if ells[i] <= threshold]


def cube_graph_path(w, a, b):
    """Shortest path (cube positions) in the touching graph, BFS."""
    adj = w.adjacency
    if a == b:
        return [a]
    seen_a = {a: None}
    seen_b = {b: None}
    frontier_a, frontier_b = [a], [b]
    meet = None
    while frontier_a and frontier_b and meet is None:
        if len(frontier_a) > len(frontier_b):
            frontier_a, frontier_b = frontier_b, frontier_a
            seen_a, seen_b = seen_b, seen_a
        nxt = []
        for u in frontier_a:
            for v in adj[u]:
                if v in seen_a:
                    continue
                seen_a[v] = u
                if v in seen_b:
                    meet = v
                    break
                nxt.append(v)
            if meet is not None:
                break
        frontier_a = nxt
    if meet is None:
        raise ValueError("cubes lie in different connected components")
    path = [meet]
    u = seen_a[meet]
    while u is not None:
        path.append(u)
        u = seen_a[u]
    path.reverse()
    u = seen_b[meet]
    while u is not None:
        path.append(u)
        u = seen_b[u]
    if path[0] != a:
        path.reverse()
    return path


def verify_invariants(w):
    """Check (w1)-(w3) style invariants; returns a list of check dicts."""
    n = w.n
    sqrt_n = np.sqrt(float(n))
    ells = w.ells()
    checks = []
    ratio = w.dist / ells
    ok1 = bool(np.all((ratio >= 1.0 - 1e-12) & (ratio <= 4.0 * sqrt_n + 1e-12)))
    checks.append(
        {
            "tag": "(w1)",
            "passed": ok1,
            "detail": {
                "min_ratio": float(ratio.min()) if len(w) else None,
                "max_ratio": float(ratio.max()) if len(w) else None,
                "bound": 4.0 * sqrt_n,
            },
        }
    )
    # overlap would force an ancestor/descendant pair in the dyadic tree
    keys = {(c.level, c.index) for c in w.cubes}
    overlap = False
    for c in w.cubes:
        for lev in range(c.level - 1, -1, -1):
            shift = c.level - lev
            if (lev, tuple(k >> shift for k in c.index)) in keys:
                overlap = True
                break
        if overlap:
            break
    checks.append({"tag": "(w2)", "passed": not overlap, "detail": {}})
    worst = 1.0
    ok3 = True
    for i, nbrs in enumerate(w.adjacency):
        for j in nbrs:
            if j <= i:
                continue
            r = ells[i] / ells[j]
            r = max(r, 1.0 / r)
            worst = max(worst, r)
            if r > 4.0:
                ok3 = False
    checks.append({"tag": "(w3)", "passed": ok3, "detail": {"max_neighbor_ratio": worst}})
    return checks


def dump_csv(w, path, w3_positions=None):
    w3set = set(w3_positions or ())
    ells = w.ells()
    with open(path, "w") as fh:
        fh.write("level," + ",".join(f"k{i+1}" for i in range(w.n)) + ",ell,dist_to_boundary,in_w3\n")
        for i, c in enumerate(w.cubes):
            ks = ",".join(str(k) for k in c.index)
            fh.write(f"{c.level},{ks},{ells[i]:.17g},{w.dist[i]:.17g},{int(i in w3set)}\n")


def summary(w):
    per_level = {}
    for c in w.cubes:
        per_level[c.level] = per_level.get(c.level, 0) + 1
    return {
        "side": w.side,
        "max_level": w.max_level,
        "root": {"origin": list(w.root.origin), "side": w.root.side},
        "count": len(w),
        "per_level": {str(k): v for k, v in sorted(per_level.items())},
        "truncation": w.truncation,
    }


def dump_summary(w, path):
    with open(path, "w") as fh:
        json.dump(summary(w), fh, indent=2, sort_keys=True)
