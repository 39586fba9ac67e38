"""Reflected cubes and connecting chains.

Every small complement cube Q gets a reflected interior cube Q* of
comparable size (edge ratio in [1, 4]) minimizing the exact box-to-box
distance, ties broken lexicographically by (level, index).  For touching
pairs of small complement cubes the reflected cubes are joined by a
shortest path of touching interior cubes; the path lengths and the chain
overlap multiplicity are the reported stability statistics.
"""

from dataclasses import dataclass
import json

import numpy as np

from .cubes import boxes_box_distance
from .whitney import cube_graph_path


@dataclass
class ReflectionMap:
    w3_positions: list
    star: list
    dist: np.ndarray
    size_ratio: np.ndarray
    dist_ratio: np.ndarray

    @property
    def c_refl(self):
        return float(self.dist_ratio.max()) if len(self.dist_ratio) else 0.0


def build_reflection(w1, w2, w3_positions):
    """Map each small complement cube to its nearest same-scale interior cube."""
    from scipy.spatial import cKDTree

    if w1.root != w2.root:
        raise ValueError("decompositions must share the same root box")
    if not len(w1):
        raise RuntimeError("interior decomposition is empty")
    sqrt_n = np.sqrt(float(w1.n))
    lo1, hi1 = w1.bounds()
    ell1 = w1.ells()
    centers1 = (lo1 + hi1) / 2.0
    by_level = {}
    for pos, c in enumerate(w1.cubes):
        by_level.setdefault(c.level, []).append(pos)
    trees = {
        lev: (np.array(ps), cKDTree(centers1[ps]))
        for lev, ps in by_level.items()
    }
    lo2, hi2 = w2.bounds()
    star = []
    dist = np.empty(len(w3_positions))
    size_ratio = np.empty(len(w3_positions))
    for row, j in enumerate(w3_positions):
        cj = w2.cubes[j]
        ellj = w2.root.cell_size(cj.level)
        center_j = (lo2[j] + hi2[j]) / 2.0
        levels = [lev for lev in (cj.level, cj.level - 1, cj.level - 2) if lev in trees]
        if not levels:
            raise RuntimeError(
                "no interior cube in the admissible size band; max_level too coarse"
            )
        best = None
        radius = 8.0 * sqrt_n * ellj
        while best is None:
            for lev in levels:
                ps, tree = trees[lev]
                slack = (sqrt_n / 2.0) * (ellj + w1.root.cell_size(lev))
                hits = tree.query_ball_point(center_j, radius + slack)
                if not hits:
                    continue
                cand = ps[hits]
                d = boxes_box_distance(lo2[j], hi2[j], lo1[cand], hi1[cand])
                for pos_c, d_c in zip(cand, d):
                    cc = w1.cubes[pos_c]
                    key = (d_c, cc.level, cc.index)
                    if best is None or key < best[0]:
                        best = (key, int(pos_c))
            if best is None:
                radius *= 2.0
                if radius > 4.0 * w1.root.side:
                    raise RuntimeError(
                        "no interior cube in the admissible size band; max_level too coarse"
                    )
        star.append(best[1])
        dist[row] = best[0][0]
        size_ratio[row] = ell1[best[1]] / ellj
    ells_j = np.array([w2.root.cell_size(w2.cubes[j].level) for j in w3_positions])
    return ReflectionMap(
        w3_positions=list(w3_positions),
        star=star,
        dist=dist,
        size_ratio=size_ratio,
        dist_ratio=dist / ells_j,
    )


@dataclass
class ChainSet:
    pairs: dict
    max_m: int

    def chain(self, j, k):
        key = (j, k) if (j, k) in self.pairs else (k, j)
        path = self.pairs[key]
        return path if key == (j, k) else path[::-1]

    def union_for(self, j):
        cubes = set()
        for (a, b), path in self.pairs.items():
            if a == j or b == j:
                cubes.update(path)
        return cubes


def touching_w3_pairs(w2, w3_positions):
    """Unordered touching pairs among the selected complement cubes."""
    w3set = set(w3_positions)
    pairs = [(j, j) for j in w3_positions]
    for i in w3_positions:
        for k in w2.adjacency[i]:
            if k in w3set and i < k:
                pairs.append((i, k))
    return pairs


def build_chains(w1, w2, w3_positions, refl):
    """Shortest interior-cube chains between reflected cubes of touching pairs."""
    starof = dict(zip(refl.w3_positions, refl.star))
    pairs = {}
    max_m = 0
    for j, k in touching_w3_pairs(w2, w3_positions):
        path = cube_graph_path(w1, starof[j], starof[k])
        pairs[(j, k)] = path
        max_m = max(max_m, len(path))
    return ChainSet(pairs=pairs, max_m=max_m)


def verify_chain_touching(w1, chains):
    """Consecutive chain cubes must geometrically touch."""
    lo, hi = w1.bounds()
    for path in chains.pairs.values():
        for a, b in zip(path, path[1:]):
            if boxes_box_distance(lo[a], hi[a], lo[b], hi[b]) > 0.0:
                return False
    return True


def overlap_statistic(chains):
    """Per-anchor chain overlap: for each selected complement cube, count how
    many of its chains cover any single interior cube, and report the maximum
    of that count over anchors together with its distribution."""
    per_anchor = {}
    for (a, b), path in chains.pairs.items():
        for j in (a, b) if a != b else (a,):
            count = per_anchor.setdefault(j, {})
            for pos in path:
                count[pos] = count.get(pos, 0) + 1
    if not per_anchor:
        return {"max_multiplicity": 0, "histogram": {}}
    maxima = {j: max(count.values()) for j, count in per_anchor.items()}
    hist = {}
    for v in maxima.values():
        hist[v] = hist.get(v, 0) + 1
    return {
        "max_multiplicity": max(maxima.values()),
        "histogram": {str(k): v for k, v in sorted(hist.items())},
    }


def dump_reflection_csv(w1, w2, refl, chains, path):
    with open(path, "w") as fh:
        fh.write("q_level,q_index,star_level,star_index,size_ratio,dist_ratio,chain_partner,m\n")
        starof = dict(zip(refl.w3_positions, refl.star))
        for (a, b), chain in sorted(chains.pairs.items()):
            ca = w2.cubes[a]
            cs = w1.cubes[starof[a]]
            row = refl.w3_positions.index(a)
            fh.write(
                f"{ca.level},{'/'.join(map(str, ca.index))},"
                f"{cs.level},{'/'.join(map(str, cs.index))},"
                f"{refl.size_ratio[row]:.17g},{refl.dist_ratio[row]:.17g},"
                f"{b},{len(chain)}\n"
            )


def reflection_summary(refl, chains):
    stats = overlap_statistic(chains)
    return {
        "c_refl": refl.c_refl,
        "max_m": chains.max_m,
        "overlap_max": stats["max_multiplicity"],
        "overlap_histogram": stats["histogram"],
        "count": len(refl.w3_positions),
    }


def dump_reflection_summary(refl, chains, path):
    with open(path, "w") as fh:
        json.dump(reflection_summary(refl, chains), fh, indent=2, sort_keys=True)
