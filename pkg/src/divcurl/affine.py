"""First-order vector polynomials fitted to grid data on dyadic cubes.

P(x) = a + B (x - xbar) with a the node mean of the field and, for
n-component fields, b_ij the node mean of (d_j u_i + d_i u_j) / 2 under
the masked discrete Jacobian.  B is symmetric by construction, so the
affine part is curl free, trace B equals the mean discrete divergence
exactly (symmetrization leaves the diagonal alone), and the node mean
of u - P over the fitting window vanishes to roundoff because xbar is
the node mean position.  Fields whose component count differs from n
keep the plain mean Jacobian.

The fitting window of a cube is the set of grid nodes in its closed
box; a pair of touching cubes uses the union of the two windows.
"""

from dataclasses import dataclass
import itertools

import numpy as np

from .cubes import cube_bounds
from .fields import curl, divergence, masked_diff


@dataclass
class AffinePolynomial:
    a: np.ndarray      # (m,)
    B: np.ndarray      # (m, n)
    xbar: np.ndarray   # (n,)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return self.a + (pts - self.xbar) @ self.B.T

    def grad_inf(self):
        return float(np.max(np.abs(self.B))) if self.B.size else 0.0

    def trace(self):
        return float(np.trace(self.B))


def _window_nodes(grid, boxes):
    """Distinct node indices (tuple of arrays) covered by the boxes."""
    idx = None
    for lo, hi in boxes:
        sl = grid.window(lo, hi)
        if sl is None:
            continue
        block = np.zeros(grid.shape, dtype=bool) if idx is None else idx
        block[sl] = True
        idx = block
    if idx is None:
        raise ValueError("cube does not intersect the grid")
    return idx


def window_mask(grid, root, cubes):
    boxes = [cube_bounds(root, c) for c in cubes]
    return _window_nodes(grid, boxes)


def field_jacobian(fld):
    """Masked discrete Jacobian, component-major: jac[i][j] = d_j u_i."""
    g = fld.grid
    m = fld.ncomp
    vals = fld.values.reshape(g.shape + (m,)) if m > 1 else fld.values[..., None]
    return [
        [masked_diff(vals[..., i], g.member, j, g.h) for j in range(g.n)]
        for i in range(m)
    ]


def fit_affine(fld, mask, jac=None):
    """Least-structure affine fit over the masked nodes; see module notes.

    Pass jac=field_jacobian(fld) when fitting many windows of one field.
    """
    g = fld.grid
    sel = mask & g.member
    count = int(sel.sum())
    if count == 0:
        raise ValueError("no member nodes in the fitting window")
    for ax in range(g.n):
        proj = np.any(sel, axis=tuple(i for i in range(g.n) if i != ax))
        if int(proj.sum()) < 2:
            raise ValueError("fitting window needs at least 2 nodes per axis")
    m = fld.ncomp
    vals = fld.values.reshape(g.shape + (m,)) if m > 1 else fld.values[..., None]
    a = vals[sel].mean(axis=0)
    if jac is None:
        jac = field_jacobian(fld)
    B = np.empty((m, g.n))
    for i in range(m):
        for j in range(g.n):
            B[i, j] = jac[i][j][sel].mean()
    if m == g.n:
        B = 0.5 * (B + B.T)
    idx = np.nonzero(sel)
    xbar = np.array([g.origin[i] + g.h * idx[i].mean() for i in range(g.n)])
    return AffinePolynomial(a=a, B=B, xbar=xbar)


def fit_affine_batch(fld, masks, jac=None):
    if jac is None:
        jac = field_jacobian(fld)
    return [fit_affine(fld, mk, jac=jac) for mk in masks]


def residual_report(fld, mask, poly, p=2):
    """Mean-zero residual check and the scale-free Poincare quotient.

    poincare_ratio = ||u - P||_p / (diam * ||grad u||_p) over the window,
    with diam the window bounding-box diagonal.  Values are 0 when the
    gradient vanishes (u already affine).
    """
    g = fld.grid
    sel = mask & g.member
    m = fld.ncomp
    vals = fld.values.reshape(g.shape + (m,)) if m > 1 else fld.values[..., None]
    idx = np.nonzero(sel)
    pts = np.stack([g.origin[i] + g.h * idx[i] for i in range(g.n)], axis=1)
    res = vals[sel] - poly(pts)
    mean_residual = float(np.max(np.abs(res.mean(axis=0))))
    grads = np.stack(
        [
            np.stack(
                [masked_diff(vals[..., i], g.member, j, g.h)[sel] for j in range(g.n)],
                axis=1,
            )
            for i in range(m)
        ],
        axis=1,
    )
    span = pts.max(axis=0) - pts.min(axis=0)
    diam = float(np.sqrt((span**2).sum()))
    if p == np.inf:
        res_norm = float(np.abs(res).max())
        grad_norm = float(np.abs(grads).max())
    else:
        w = g.cell_measure()
        res_norm = float((np.sum(np.abs(res) ** p) * w) ** (1.0 / p))
        grad_norm = float((np.sum(np.abs(grads) ** p) * w) ** (1.0 / p))
    ratio = 0.0 if grad_norm == 0.0 else res_norm / (diam * grad_norm)
    return {
        "mean_residual": mean_residual,
        "poincare_ratio": ratio,
        "residual_norm": res_norm,
        "grad_norm": grad_norm,
        "diam": diam,
        "nodes": int(sel.sum()),
    }


def gradient_comparison(fld, mask, poly):
    """sup |grad P| / sup |grad u| over the window; at most 1 by the mean
    construction (each entry of B is a mean of sampled entries)."""
    g = fld.grid
    sel = mask & g.member
    m = fld.ncomp
    vals = fld.values.reshape(g.shape + (m,)) if m > 1 else fld.values[..., None]
    sup_u = 0.0
    for i in range(m):
        for j in range(g.n):
            d = masked_diff(vals[..., i], g.member, j, g.h)
            sup_u = max(sup_u, float(np.abs(d[sel]).max()))
    sup_p = poly.grad_inf()
    ratio = 0.0 if sup_u == 0.0 else sup_p / sup_u
    return {"grad_inf_poly": sup_p, "grad_inf_field": sup_u, "ratio": ratio}


def pair_difference(fld, mask_a, mask_b, p=2):
    """Difference of the fits of two touching windows measured on their union.

    Controls the chain telescoping step: ||P_a - P_b||_p over the union
    window, normalized by diam * ||grad u||_p there.
    """
    g = fld.grid
    pa = fit_affine(fld, mask_a)
    pb = fit_affine(fld, mask_b)
    union = (mask_a | mask_b) & g.member
    idx = np.nonzero(union)
    pts = np.stack([g.origin[i] + g.h * idx[i] for i in range(g.n)], axis=1)
    diff = pa(pts) - pb(pts)
    rep = residual_report(fld, mask_a | mask_b, pa, p=p)
    if p == np.inf:
        dnorm = float(np.abs(diff).max()) if diff.size else 0.0
    else:
        dnorm = float((np.sum(np.abs(diff) ** p) * g.cell_measure()) ** (1.0 / p))
    denom = rep["diam"] * rep["grad_norm"]
    return {
        "diff_norm": dnorm,
        "normalized": 0.0 if denom == 0.0 else dnorm / denom,
        "diam": rep["diam"],
    }


def chain_derivatives(fld):
    """Precomputed div, curl, and Jacobian for chain_difference sweeps."""
    return {"div": divergence(fld), "curl": curl(fld), "jac": field_jacobian(fld)}


def chain_difference(fld, root, cubes, p=2, derivs=None):
    """Both sides of the chain telescoping estimate along a path of cubes.

    lhs is ||P_first - P_last||_p over the first cube's window; the bound
    factor is ell(first) * (||div u||_p + ||curl u||_p) over the union of
    all windows.  The sup variant pairs the max-norm difference with
    ell(first) * sup |jacobian| over the union instead.  Ratios are 0 when
    both sides vanish and inf when only the bound side does.  Pass
    derivs=chain_derivatives(fld) when sweeping many chains of one field.
    """
    g = fld.grid
    if fld.ncomp != g.n:
        raise ValueError("chain difference needs an n-component field")
    if not cubes:
        raise ValueError("empty chain")
    if derivs is None:
        derivs = chain_derivatives(fld)
    jac = derivs["jac"]
    first = cubes[0]
    mask_first = window_mask(g, root, [first])
    pa = fit_affine(fld, mask_first, jac=jac)
    pb = (
        pa
        if len(cubes) == 1
        else fit_affine(fld, window_mask(g, root, [cubes[-1]]), jac=jac)
    )
    sel = mask_first & g.member
    idx = np.nonzero(sel)
    pts = np.stack([g.origin[i] + g.h * idx[i] for i in range(g.n)], axis=1)
    diff = pa(pts) - pb(pts)
    union = window_mask(g, root, list(cubes)) & g.member
    dv = derivs["div"][union]
    cl = derivs["curl"][union]
    cl = cl.reshape(len(dv), -1)
    jac_sup = max(
        float(np.abs(jac[i][j][union]).max())
        for i in range(g.n)
        for j in range(g.n)
    )
    ell = root.cell_size(first.level)
    w = g.cell_measure()
    lhs_inf = float(np.abs(diff).max()) if diff.size else 0.0
    if p == np.inf:
        lhs = lhs_inf
        rhs = ell * (float(np.abs(dv).max()) + float(np.abs(cl).max()))
    else:
        lhs = float((np.sum(np.abs(diff) ** p) * w) ** (1.0 / p))
        rhs = ell * (
            float((np.sum(np.abs(dv) ** p) * w) ** (1.0 / p))
            + float((np.sum(np.abs(cl) ** p) * w) ** (1.0 / p))
        )
    rhs_inf = ell * jac_sup

    def _quot(num, den):
        if den > 1e-13 * max(1.0, num):
            return num / den, False
        if num <= 1e-13:
            return 0.0, False
        return float("inf"), True

    ratio, viol = _quot(lhs, rhs)
    ratio_inf, viol_inf = _quot(lhs_inf, rhs_inf)
    return {
        "lhs": lhs,
        "rhs_factor": rhs,
        "ratio": ratio,
        "lhs_inf": lhs_inf,
        "rhs_inf_factor": rhs_inf,
        "ratio_inf": ratio_inf,
        "m": len(cubes),
        "ell": ell,
        "violation": bool(viol or viol_inf),
    }


def polynomial_lp(poly, root, cube, p=2, samples_per_axis=6):
    """Lp norm of P over a cube by midpoint sampling (exact trend checks)."""
    lo, hi = cube_bounds(root, cube)
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    n = len(lo)
    step = (hi - lo) / samples_per_axis
    axes = [lo[i] + step[i] * (np.arange(samples_per_axis) + 0.5) for i in range(n)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = poly(pts)
    cellv = float(np.prod(step))
    if p == np.inf:
        return float(np.abs(vals).max())
    return float((np.sum(np.abs(vals) ** p) * cellv) ** (1.0 / p))
