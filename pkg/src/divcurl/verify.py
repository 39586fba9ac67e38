"""Aggregated invariant suite for one domain.

Builds the full geometric pipeline (interior and complement cube
decompositions, reflected cubes, chains, partition of unity, affine fits
on seeded random fields) and evaluates every tagged check.  Each check
reports {tag, passed, detail}; geometric failures short-circuit the later
stages since those build on the failed structure.

The fault hook shrinks one interior cube three levels in place, which
forces a touching-size violation while keeping the tree overlap-free;
it exists so that callers can assert the failure path end to end.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .cubes import DyadicCube, cube_bounds, boxes_box_distance, root_for_domain
from .whitney import (
    WhitneyDecomposition,
    whitney_decompose,
    select_w3,
    verify_invariants,
)
from .reflection import (
    build_reflection,
    build_chains,
    verify_chain_touching,
    overlap_statistic,
)
from .partition import SUPPORT, build_partition, eval_partition, partition_sum
from . import fields as field_calculus
from .affine import fit_affine, residual_report, gradient_comparison, window_mask


@dataclass
class SuiteReport:
    domain_tag: str
    max_level: int
    checks: list = dc_field(default_factory=list)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def failing_tags(self):
        return [c["tag"] for c in self.checks if not c["passed"]]

    def to_dict(self):
        return {
            "domain": self.domain_tag,
            "max_level": self.max_level,
            "passed": self.passed,
            "checks": self.checks,
        }


def inject_size_fault(w):
    """Return a copy of w with one cube shrunk three levels in place."""
    ells = w.ells()
    lo, hi = w.bounds()
    for i, nbrs in enumerate(w.adjacency):
        c = w.cubes[i]
        shrunk = DyadicCube(level=c.level + 3, index=tuple(8 * v for v in c.index))
        slo, shi = cube_bounds(w.root, shrunk)
        for k in nbrs:
            if ells[k] < ells[i]:
                continue
            d = boxes_box_distance(slo, shi, lo[k][None, :], hi[k][None, :])
            if float(d[0]) == 0.0:
                cubes = list(w.cubes)
                cubes[i] = shrunk
                return WhitneyDecomposition(
                    root=w.root,
                    side=w.side,
                    max_level=max(w.max_level, shrunk.level),
                    cubes=cubes,
                    dist=w.dist.copy(),
                    truncation=dict(w.truncation),
                    domain_tag=w.domain_tag,
                )
    raise RuntimeError("no cube suitable for fault injection")


def _whitney_checks(w, side_label):
    out = []
    for c in verify_invariants(w):
        c["detail"]["side"] = side_label
        out.append(c)
    return out


def _reflection_checks(w1, w2, w3_positions):
    refl = build_reflection(w1, w2, w3_positions)
    ok_size = bool(np.all((refl.size_ratio >= 1.0) & (refl.size_ratio <= 4.0)))
    checks = [
        {
            "tag": "(numero)",
            "passed": bool(ok_size and np.isfinite(refl.c_refl)),
            "detail": {
                "size_ratio_min": float(refl.size_ratio.min()) if len(refl.size_ratio) else None,
                "size_ratio_max": float(refl.size_ratio.max()) if len(refl.size_ratio) else None,
                "c_refl": refl.c_refl,
            },
        }
    ]
    chains = build_chains(w1, w2, w3_positions, refl)
    stats = overlap_statistic(chains)
    checks.append(
        {
            "tag": "(finito)",
            "passed": verify_chain_touching(w1, chains) and stats["max_multiplicity"] >= 1,
            "detail": {
                "max_m": chains.max_m,
                "overlap_max": stats["max_multiplicity"],
            },
        }
    )
    return checks, refl, chains


def _partition_points(w2, w3_positions, count, seed):
    rng = np.random.default_rng(seed)
    lo, hi = w2.bounds()
    lo = lo[w3_positions]
    hi = hi[w3_positions]
    rows = rng.integers(0, len(w3_positions), size=count)
    t = rng.random(size=(count, w2.n))
    return lo[rows] + t * (hi[rows] - lo[rows])


def _partition_checks(w2, w3_positions, seed, sample_count=2000):
    pu = build_partition(w2, w3_positions)
    pts = _partition_points(w2, w3_positions, sample_count, seed)
    total, _ = partition_sum(pu, pts)
    sum_err = float(np.abs(total - 1.0).max()) if len(total) else 0.0
    checks = [
        {
            "tag": "partition-sum",
            "passed": sum_err <= 1e-12,
            "detail": {"max_error": sum_err, "points": int(len(pts))},
        }
    ]
    # support: just outside the 17/16 halo every bump must vanish
    outside = 0
    rng = np.random.default_rng(seed + 1)
    r = SUPPORT * pu.half
    lo = pu.centers - r[:, None]
    hi = pu.centers + r[:, None]
    margin = 1e-9
    probe = rng.random((256, w2.n))
    box_lo = lo.min(axis=0) - 0.5
    box_hi = hi.max(axis=0) + 0.5
    probe = box_lo + probe * (box_hi - box_lo)
    for x in probe:
        inside_any = bool(np.all((x >= lo - margin) & (x <= hi + margin), axis=1).any())
        if not inside_any and eval_partition(pu, x):
            outside += 1
    checks.append(
        {
            "tag": "partition-support",
            "passed": outside == 0,
            "detail": {"nonzero_outside_halo": outside},
        }
    )
    # scaled gradient bound, uniform constant over the bumps
    sample = pts[:: max(1, len(pts) // 400)]
    c_phi = 0.0
    for x in sample:
        for row, _, grad in eval_partition(pu, x):
            ell = 2.0 * float(pu.half[row])
            c_phi = max(c_phi, float(np.linalg.norm(grad)) * ell)
    checks.append(
        {
            "tag": "partition-gradient",
            "passed": bool(np.isfinite(c_phi)),
            "detail": {"c_phi": c_phi},
        }
    )
    return checks, pu


def _affine_checks(dom, w1, refl, seed, field_count=2, window_limit=24):
    ell_min = float(w1.ells()[list(refl.star)].min()) if refl.star else w1.root.side
    h = ell_min / 2.0
    # keep the verification grid around a million nodes or fewer
    coarsest = dom.diameter() / (1024 if dom.n == 2 else 96)
    h = max(h, coarsest)
    grid = field_calculus.build_grid(dom, h)
    stride = max(1, len(refl.star) // window_limit)
    rows = list(range(0, len(refl.star), stride))
    masks = [window_mask(grid, w1.root, [w1.cubes[refl.star[r]]]) for r in rows]
    worst_mean = 0.0
    worst_trace = 0.0
    worst_grad = 0.0
    fitted = 0
    for k in range(field_count):
        v = field_calculus.generate_test_field(dom, grid, "none", seed=seed + k)
        sup = float(np.abs(v.values[grid.member]).max())
        div_vals = field_calculus.divergence(v)
        for mask in masks:
            try:
                poly = fit_affine(v, mask)
            except ValueError:
                continue
            fitted += 1
            rep = residual_report(v, mask, poly)
            worst_mean = max(worst_mean, rep["mean_residual"] / max(sup, 1e-300))
            sel = mask & grid.member
            div_mean = float(div_vals[sel].mean())
            scale = max(float(np.abs(div_vals[sel]).max()), 1e-300)
            worst_trace = max(worst_trace, abs(poly.trace() - div_mean) / scale)
            worst_grad = max(worst_grad, gradient_comparison(v, mask, poly)["ratio"])
    return [
        {
            "tag": "(prop2)",
            "passed": worst_mean <= 1e-10,
            "detail": {"max_mean_residual_rel": worst_mean, "windows": fitted},
        },
        {
            "tag": "(diveP)",
            "passed": worst_trace <= 1e-12,
            "detail": {"max_trace_gap_rel": worst_trace},
        },
        {
            "tag": "(stimaPinf)",
            "passed": worst_grad <= 1.02,
            "detail": {"max_grad_ratio": worst_grad},
        },
    ]


def run_suite(dom, max_level, seed=0, inject_fault=None, with_fields=True):
    """Evaluate every tagged invariant on one domain; see module notes."""
    root = root_for_domain(dom)
    w1 = whitney_decompose(dom, "interior", max_level, root=root)
    w2 = whitney_decompose(dom, "complement", max_level, root=root)
    if inject_fault == "w3":
        w1 = inject_size_fault(w1)
    elif inject_fault is not None:
        raise ValueError("unknown fault tag")
    report = SuiteReport(domain_tag=dom.tag, max_level=max_level)
    report.checks += _whitney_checks(w1, "interior")
    report.checks += _whitney_checks(w2, "complement")
    if not report.passed:
        return report
    w3_positions = select_w3(w2, dom.epsilon, dom.delta)
    if not w3_positions:
        report.checks.append(
            {
                "tag": "(numero)",
                "passed": False,
                "detail": {"reason": "no complement cube below the small-cube threshold"},
            }
        )
        return report
    refl_checks, refl, chains = _reflection_checks(w1, w2, w3_positions)
    report.checks += refl_checks
    part_checks, _ = _partition_checks(w2, w3_positions, seed)
    report.checks += part_checks
    if not report.passed:
        return report
    if with_fields:
        report.checks += _affine_checks(dom, w1, refl, seed)
    return report
