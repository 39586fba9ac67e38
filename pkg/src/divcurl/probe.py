"""Empirical probe of the arc-connectivity constants of a domain.

For seeded point pairs x, y with |x - y| below delta, several candidate
arcs are scored: the straight segment, a polyline through the centers of
a shortest path in the interior cube adjacency graph (optionally
straightened by greedy shortcutting), and tent arcs lifted toward the
deepest interior point.  Each feasible arc gives an implied epsilon,
the largest value for which both the length condition
len(arc) <= |x - y| / eps and the cigar condition
d(z) >= eps |x - z||y - z| / |x - y| hold along the sampled arc; the
pair's certificate is the best arc.  The probe reports the worst pair:
an upper bound on the epsilon any certificate could claim, useful to
falsify a shipped constant but never a proof.
"""

from dataclasses import dataclass
import math

import numpy as np

from .cubes import root_for_domain, cube_center
from .whitney import whitney_decompose, cube_graph_path

ARC_SAMPLES = 48
ENDPOINT_SKIP = 1e-3


@dataclass
class ProbeReport:
    pairs: int
    worst_epsilon: float
    worst_length_ratio: float
    failing_pairs: int
    shipped_epsilon: float
    witnesses: list

    def to_dict(self):
        return {
            "pairs": self.pairs,
            "worst_epsilon": self.worst_epsilon,
            "worst_length_ratio": self.worst_length_ratio,
            "failing_pairs": self.failing_pairs,
            "shipped_epsilon": self.shipped_epsilon,
            "witnesses": self.witnesses,
        }


def _polyline_points(verts, per_seg=ARC_SAMPLES):
    pts = []
    for a, b in zip(verts[:-1], verts[1:]):
        t = np.linspace(0.0, 1.0, per_seg, endpoint=False)[:, None]
        pts.append(a + t * (b - a))
    pts.append(np.asarray(verts[-1])[None, :])
    return np.concatenate(pts, axis=0)


def _polyline_length(verts):
    return float(
        sum(np.linalg.norm(np.asarray(b) - np.asarray(a)) for a, b in zip(verts[:-1], verts[1:]))
    )


def _arc_epsilon(dom, verts):
    """Implied epsilon of one polyline arc, or None when it exits the domain."""
    verts = [np.asarray(v, dtype=np.float64) for v in verts]
    x, y = verts[0], verts[-1]
    gap = float(np.linalg.norm(y - x))
    if gap == 0.0:
        return None
    pts = _polyline_points(verts)
    inside = dom.membership(pts)
    if not inside.all():
        return None
    length = _polyline_length(verts)
    eps_len = gap / length
    d = dom.boundary_distance(pts)
    dx = np.linalg.norm(pts - x, axis=1)
    dy = np.linalg.norm(pts - y, axis=1)
    denom = dx * dy / gap
    keep = denom > ENDPOINT_SKIP * gap
    if keep.any():
        eps_cigar = float(np.min(d[keep] / denom[keep]))
    else:
        eps_cigar = math.inf
    return {
        "epsilon": min(eps_len, eps_cigar),
        "eps_length": eps_len,
        "eps_cigar": eps_cigar,
        "length_ratio": length / gap,
    }


def _shortcut(dom, verts, passes=2):
    """Drop interior vertices whenever the bridging segment stays inside."""
    verts = [np.asarray(v, dtype=np.float64) for v in verts]
    for _ in range(passes):
        if len(verts) <= 2:
            break
        out = [verts[0]]
        i = 0
        while i < len(verts) - 1:
            j = len(verts) - 1
            while j > i + 1:
                seg = _polyline_points([verts[i], verts[j]])
                if dom.membership(seg).all():
                    break
                j -= 1
            out.append(verts[j])
            i = j
        verts = out
    return verts


def _deep_point(dom, cells=64):
    lo, hi = dom.bounding_box(pad=0.0)
    axes = [np.linspace(lo[i], hi[i], cells) for i in range(dom.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    member = dom.membership(pts)
    if not member.any():
        raise ValueError("no interior sample found for the deep point")
    d = np.full(len(pts), -1.0)
    d[member] = dom.boundary_distance(pts[member])
    return pts[int(np.argmax(d))]


def _anchor_cube(dom, centers, p, tries=32):
    """Index of a cube whose center sees p along an interior segment.

    Points very close to the boundary live in cubes finer than the
    decomposition depth, so lookup by containment fails; the nearest
    visible center is an equally valid graph entry point.
    """
    d2 = np.einsum("ij,ij->i", centers - p, centers - p)
    tries = min(tries, len(centers))
    order = np.argpartition(d2, tries - 1)[:tries]
    order = order[np.argsort(d2[order])]
    for idx in order:
        seg = _polyline_points([p, centers[idx]])
        if dom.membership(seg).all():
            return int(idx)
    return None


def _sample_pairs(dom, pair_count, seed):
    rng = np.random.default_rng(seed)
    lo, hi = dom.bounding_box(pad=0.0)
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    pairs = []
    guard = 0
    while len(pairs) < pair_count and guard < 1000:
        guard += 1
        batch = rng.uniform(lo, hi, size=(4 * pair_count, dom.n))
        batch = batch[dom.membership(batch)]
        if len(batch) < 2:
            continue
        half = len(batch) // 2
        a, b = batch[:half], batch[half: 2 * half]
        gap = np.linalg.norm(a - b, axis=1)
        ok = (gap > 1e-9) & (gap < dom.delta)
        for u, v in zip(a[ok], b[ok]):
            pairs.append((u, v))
            if len(pairs) == pair_count:
                break
    if len(pairs) < pair_count:
        raise ValueError("could not sample enough admissible pairs")
    return pairs


def epsilon_delta_probe(dom, pair_count=64, seed=0, max_level=6):
    """Score seeded pairs and report the worst implied epsilon."""
    root = root_for_domain(dom)
    w1 = whitney_decompose(dom, "interior", max_level, root=root)
    deep = _deep_point(dom)
    all_centers = np.array([cube_center(root, c) for c in w1.cubes])
    results = []
    for x, y in _sample_pairs(dom, pair_count, seed):
        gap = float(np.linalg.norm(y - x))
        candidates = [[x, y]]
        cx = w1.locate(x)
        if cx is None:
            cx = _anchor_cube(dom, all_centers, x)
        cy = w1.locate(y)
        if cy is None:
            cy = _anchor_cube(dom, all_centers, y)
        if cx is not None and cy is not None:
            try:
                path = cube_graph_path(w1, cx, cy)
                centers = [np.asarray(cube_center(root, w1.cubes[p])) for p in path]
                poly = [x] + centers + [y]
                candidates.append(poly)
                candidates.append(_shortcut(dom, poly))
            except ValueError:
                pass
        for t in (0.25, 0.5, 1.0):
            lift = 0.5 * t * gap
            ux = deep - x
            uy = deep - y
            nx = np.linalg.norm(ux)
            ny = np.linalg.norm(uy)
            if nx < 1e-12 or ny < 1e-12:
                continue
            a = x + min(lift, nx) * ux / nx
            b = y + min(lift, ny) * uy / ny
            candidates.append([x, a, b, y])
        best = None
        for verts in candidates:
            score = _arc_epsilon(dom, verts)
            if score is None:
                continue
            if best is None or score["epsilon"] > best["epsilon"]:
                best = score
        if best is None:
            best = {"epsilon": 0.0, "eps_length": 0.0, "eps_cigar": 0.0, "length_ratio": math.inf}
        best["x"] = [float(c) for c in x]
        best["y"] = [float(c) for c in y]
        results.append(best)
    worst = min(results, key=lambda r: r["epsilon"])
    failing = [r for r in results if r["epsilon"] < dom.epsilon]
    witnesses = sorted(results, key=lambda r: r["epsilon"])[:3]
    return ProbeReport(
        pairs=len(results),
        worst_epsilon=worst["epsilon"],
        worst_length_ratio=max(r["length_ratio"] for r in results),
        failing_pairs=len(failing),
        shipped_epsilon=dom.epsilon,
        witnesses=witnesses,
    )
