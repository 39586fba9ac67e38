"""Empirical Friedrichs and Gaffney constants on a domain.

Ratios use the W^{1,p} norm (||v||_p^p + ||grad v||_p^p)^{1/p} against
sum-of-norm denominators: field + curl + div for Friedrichs, curl + div
for Gaffney.  Test fields are spanned by a fixed basis of collar fields,
built from cosine and sine modes cut off by a smooth collar so the
boundary condition holds by construction: rotated gradients of a stream
potential (normal component vanishes, discrete divergence is identically
zero) or gradients of a scalar potential (tangential component vanishes,
discrete curl is identically zero).  Derivatives of basis fields use
plain central differences on the zero-padded grid, so the discrete
integration-by-parts identity sum |grad v|^2 = sum (div v)^2 +
sum |curl v|^2 holds exactly for every spanned field.

estimate_constant takes the max ratio over seeded coefficient samples
and refines the best few by projected gradient ascent; the p=2 spectral
oracle assembles both quadratic forms on the collar-constrained node set
and returns the exact discrete suprema for cross-checking.
"""

from dataclasses import dataclass, field as dc_field
import math

import numpy as np

from .fields import build_grid, collar_cutoff, plain_diff, GridField

DEN_SMALL = 1e-14
WITNESS_EPS = 1e-12


def default_collar_width(dom, h):
    return max(4.0 * h, dom.epsilon * dom.delta / 4.0)


def _lp(arr, p, w):
    """Riemann Lp over the flattened array with cell weight w."""
    if p == np.inf:
        return float(np.max(np.abs(arr))) if arr.size else 0.0
    return float((np.sum(np.abs(arr) ** p) * w) ** (1.0 / p))


@dataclass
class LabBasis:
    dom: object
    grid: object
    bc: str
    collar_width: float
    fields: np.ndarray   # (K, *shape, n)
    grads: np.ndarray    # (K, *shape, n, n)
    divs: np.ndarray     # (K, *shape)
    curls: np.ndarray    # (K, *shape) in 2D, (K, *shape, 3) in 3D

    @property
    def size(self):
        return self.fields.shape[0]

    def field(self, coeffs):
        return np.tensordot(coeffs, self.fields, axes=1)

    def combo(self, coeffs):
        return (
            np.tensordot(coeffs, self.fields, axes=1),
            np.tensordot(coeffs, self.grads, axes=1),
            np.tensordot(coeffs, self.divs, axes=1),
            np.tensordot(coeffs, self.curls, axes=1),
        )


def _mode_list(n, kmax):
    """Deterministic half-lattice of nonzero integer wavevectors."""
    out = []
    rng = range(-kmax, kmax + 1)
    if n == 2:
        lattice = [(i, j) for i in rng for j in rng]
    else:
        lattice = [(i, j, k) for i in rng for j in rng for k in rng]
    for z in lattice:
        if all(c == 0 for c in z):
            continue
        neg = tuple(-c for c in z)
        if neg in out:
            continue
        out.append(z)
    return out


def _mode_values(grid, z, phase, extent):
    ph = np.full(grid.shape, phase)
    for i in range(grid.n):
        if z[i]:
            ph = ph + (2.0 * np.pi * z[i] / extent) * grid.axis_grid(i)
    return np.cos(ph)


def build_lab_basis(dom, grid, bc, kmax=3, collar_width=None):
    """Collar-field basis with precomputed derivative arrays."""
    if bc not in ("normal_zero", "tangential_zero"):
        raise ValueError("bc must be normal_zero or tangential_zero")
    n = grid.n
    h = grid.h
    if collar_width is None:
        collar_width = default_collar_width(dom, h)
    chi = collar_cutoff(grid, collar_width)
    extent = float(np.max(np.asarray(grid.shape) - 1)) * h
    modes = _mode_list(n, kmax)
    pots = []
    for z in modes:
        for phase in (0.0, 0.5 * np.pi):
            pots.append(chi * _mode_values(grid, z, phase, extent))
    # drop potentials that the collar kills entirely
    pots = [p for p in pots if float(np.abs(p).max()) > 1e-12]
    raw = []
    if bc == "tangential_zero":
        for pot in pots:
            raw.append(np.stack([plain_diff(pot, i, h) for i in range(n)], axis=-1))
    elif n == 2:
        for pot in pots:
            raw.append(np.stack([-plain_diff(pot, 1, h), plain_diff(pot, 0, h)], axis=-1))
    else:
        for pot in pots:
            for comp in range(3):
                a = [np.zeros(grid.shape)] * 3
                a[comp] = pot
                raw.append(
                    np.stack(
                        [
                            plain_diff(a[2], 1, h) - plain_diff(a[1], 2, h),
                            plain_diff(a[0], 2, h) - plain_diff(a[2], 0, h),
                            plain_diff(a[1], 0, h) - plain_diff(a[0], 1, h),
                        ],
                        axis=-1,
                    )
                )
    fields = np.stack([f for f in raw if float(np.abs(f).max()) > 1e-12])
    k = fields.shape[0]
    grads = np.empty((k,) + grid.shape + (n, n))
    for idx in range(k):
        for i in range(n):
            for j in range(n):
                grads[idx, ..., i, j] = plain_diff(fields[idx, ..., i], j, h)
    divs = np.einsum("k...ii->k...", grads)
    if n == 2:
        curls = grads[..., 1, 0] - grads[..., 0, 1]
    else:
        curls = np.stack(
            [
                grads[..., 2, 1] - grads[..., 1, 2],
                grads[..., 0, 2] - grads[..., 2, 0],
                grads[..., 1, 0] - grads[..., 0, 1],
            ],
            axis=-1,
        )
    return LabBasis(
        dom=dom,
        grid=grid,
        bc=bc,
        collar_width=float(collar_width),
        fields=fields,
        grads=grads,
        divs=divs,
        curls=curls,
    )


# -- ratio functionals ---------------------------------------------------------


def ratio_parts(vals, grads, divs, curls, p, w):
    lp = _lp(vals, p, w)
    gp = _lp(grads, p, w)
    dv = _lp(divs, p, w)
    cl = _lp(curls, p, w)
    if p == np.inf:
        w1p = max(lp, gp)
    else:
        w1p = (lp**p + gp**p) ** (1.0 / p)
    return {"lp": lp, "grad_lp": gp, "div_lp": dv, "curl_lp": cl, "w1p": w1p}


def _field_parts(v, p):
    from .fields import gradient, divergence, curl as curl_op

    g = v.grid
    w = g.cell_measure()
    return ratio_parts(
        v.values, gradient(v), divergence(v), curl_op(v), p, w
    )


def friedrichs_ratio(v, p=2):
    """||v||_W1p / (||v|| + ||curl v|| + ||div v||); inf when the
    denominator falls below the unbounded-direction floor."""
    parts = _field_parts(v, p)
    den = parts["lp"] + parts["curl_lp"] + parts["div_lp"]
    if den <= DEN_SMALL * max(parts["w1p"], 1e-300):
        return math.inf if parts["w1p"] > 0 else 0.0
    return parts["w1p"] / den


def gaffney_ratio(v, p=2):
    """||v||_W1p / (||curl v|| + ||div v||); inf marks an unbounded-direction
    candidate."""
    parts = _field_parts(v, p)
    den = parts["curl_lp"] + parts["div_lp"]
    if den <= DEN_SMALL * max(parts["w1p"], 1e-300):
        return math.inf if parts["w1p"] > 0 else 0.0
    return parts["w1p"] / den


def _coeff_ratio(basis, coeffs, inequality, p):
    vals, grads, divs, curls = basis.combo(coeffs)
    w = basis.grid.cell_measure()
    parts = ratio_parts(vals, grads, divs, curls, p, w)
    den = parts["curl_lp"] + parts["div_lp"]
    if inequality == "friedrichs":
        den += parts["lp"]
    if den <= DEN_SMALL * max(parts["w1p"], 1e-300):
        return math.inf if parts["w1p"] > 0 else 0.0
    return parts["w1p"] / den


def _norm_and_grad(stack, coeffs, p, w):
    """(||u(c)||_p, d||u||/dc) for u = sum c_k stack_k, smooth p in (1, inf)."""
    u = np.tensordot(coeffs, stack, axes=1)
    flat = u.reshape(-1)
    a = np.abs(flat)
    norm = (np.sum(a**p) * w) ** (1.0 / p)
    if norm == 0.0:
        return 0.0, np.zeros(len(coeffs))
    kernel = (a ** (p - 1.0)) * np.sign(flat)
    grad = (
        np.tensordot(stack.reshape(len(coeffs), -1), kernel, axes=1)
        * w
        * norm ** (1.0 - p)
    )
    return float(norm), grad


def _ratio_and_grad(basis, coeffs, inequality, p):
    w = basis.grid.cell_measure()
    k = basis.size
    lp, d_lp = _norm_and_grad(basis.fields.reshape(k, -1), coeffs, p, w)
    gp, d_gp = _norm_and_grad(basis.grads.reshape(k, -1), coeffs, p, w)
    dv, d_dv = _norm_and_grad(basis.divs.reshape(k, -1), coeffs, p, w)
    cl, d_cl = _norm_and_grad(basis.curls.reshape(k, -1), coeffs, p, w)
    w1p = (lp**p + gp**p) ** (1.0 / p)
    if w1p == 0.0:
        return 0.0, np.zeros(k)
    d_w1p = w1p ** (1.0 - p) * (lp ** (p - 1.0) * d_lp + gp ** (p - 1.0) * d_gp)
    den = cl + dv
    d_den = d_cl + d_dv
    if inequality == "friedrichs":
        den += lp
        d_den = d_den + d_lp
    if den <= DEN_SMALL * w1p:
        return math.inf, np.zeros(k)
    ratio = w1p / den
    d_ratio = d_w1p / den - w1p * d_den / den**2
    return ratio, d_ratio


def maximize_ratio(basis, inequality, p, init_coeffs, iters=60, tol=1e-10):
    """Projected gradient ascent over basis coefficients.

    The iterate is rescaled to unit W^{1,p} norm each step (the ratio is
    0-homogeneous, so this only conditions the search); a backtracking
    line search keeps the ratio trace nondecreasing.
    """
    if not (1.0 < p < np.inf):
        raise ValueError("ascent needs p in (1, inf); use sampling for p = inf")
    c = np.asarray(init_coeffs, dtype=np.float64).copy()
    nrm = np.linalg.norm(c)
    if nrm == 0.0:
        raise ValueError("init must be nonzero")
    c /= nrm
    ratio, grad = _ratio_and_grad(basis, c, inequality, p)
    trace = [ratio]
    step = 0.5
    converged = False
    for _ in range(iters):
        gn = np.linalg.norm(grad)
        if gn < tol:
            converged = True
            break
        d = grad / gn
        improved = False
        while step > 1e-12:
            cand = c + step * d
            cand /= np.linalg.norm(cand)
            r2, g2 = _ratio_and_grad(basis, cand, inequality, p)
            if r2 >= ratio:
                improved = r2 > ratio * (1.0 + 1e-14)
                c, ratio, grad = cand, r2, g2
                trace.append(ratio)
                step *= 1.3
                break
            step *= 0.5
        if not improved:
            converged = step <= 1e-12 or abs(trace[-1] - ratio) < tol
            trace.append(ratio)
            break
    return {
        "ratio": ratio,
        "coeffs": c,
        "trace": trace,
        "converged": converged,
    }


@dataclass
class ConstantEstimate:
    inequality: str
    bc: str
    p: float
    domain: dict
    samples: int
    seed: int
    h: float
    collar_width: float
    basis_size: int
    max_ratio: float
    sample_ratios: list
    trace: list = dc_field(default_factory=list)
    converged: bool = False
    maximizer_coeffs: list = dc_field(default_factory=list)

    def to_dict(self):
        return {
            "inequality": self.inequality,
            "bc": self.bc,
            "p": self.p if self.p != np.inf else "inf",
            "domain": self.domain,
            "samples": self.samples,
            "seed": self.seed,
            "h": self.h,
            "collar_width": self.collar_width,
            "basis_size": self.basis_size,
            "max_ratio": self.max_ratio,
            "sample_ratios": self.sample_ratios,
            "optimizer_trace": self.trace,
            "converged": self.converged,
            "maximizer_coeffs": self.maximizer_coeffs,
        }


def estimate_constant(
    dom,
    inequality,
    bc,
    p=2,
    samples=16,
    seed=0,
    h=None,
    kmax=3,
    collar_width=None,
    ascent_iters=60,
    basis=None,
):
    """Max ratio over seeded collar fields, refined by ascent from the
    best three samples (skipped for p = inf, where the ratio is
    non-smooth and sampling alone is used)."""
    if inequality not in ("friedrichs", "gaffney"):
        raise ValueError("inequality must be friedrichs or gaffney")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if h is None:
        h = 1.0 / 128.0
    if basis is None:
        grid = build_grid(dom, h, pad=2.0 * h)
        basis = build_lab_basis(dom, grid, bc, kmax=kmax, collar_width=collar_width)
    rng = np.random.default_rng(seed)
    ratios = []
    coeffs = []
    for _ in range(samples):
        c = rng.standard_normal(basis.size)
        coeffs.append(c)
        ratios.append(_coeff_ratio(basis, c, inequality, p))
    order = np.argsort(ratios)[::-1]
    best = float(ratios[order[0]])
    trace = []
    best_c = coeffs[order[0]]
    converged = True
    if p != np.inf and 1.0 < p:
        for pick in order[: min(3, len(order))]:
            res = maximize_ratio(
                basis, inequality, p, coeffs[pick], iters=ascent_iters
            )
            if res["ratio"] > best:
                best = res["ratio"]
                best_c = res["coeffs"]
                trace = [float(t) for t in res["trace"]]
                converged = res["converged"]
    return ConstantEstimate(
        inequality=inequality,
        bc=bc,
        p=p,
        domain=basis.dom.descriptor(),
        samples=samples,
        seed=seed,
        h=basis.grid.h,
        collar_width=basis.collar_width,
        basis_size=basis.size,
        max_ratio=best,
        sample_ratios=[float(r) for r in ratios],
        trace=trace,
        converged=converged,
        maximizer_coeffs=[float(x) for x in best_c],
    )


# -- p = 2 spectral oracle -----------------------------------------------------


def _central_diff_matrix(grid, free_idx, axis):
    """Sparse central difference mapping free-node values to all nodes."""
    from scipy.sparse import coo_matrix

    shape = grid.shape
    strides = np.ones(grid.n, dtype=np.int64)
    for i in range(grid.n - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    free_lin = np.ravel_multi_index(np.nonzero(free_idx), shape)
    step = strides[axis]
    rows = []
    cols = []
    data = []
    coords = np.array(np.nonzero(free_idx)).T
    for c, (lin, pt) in enumerate(zip(free_lin, coords)):
        if pt[axis] + 1 < shape[axis]:
            rows.append(lin + step)
            cols.append(c)
            data.append(1.0)
        if pt[axis] - 1 >= 0:
            rows.append(lin - step)
            cols.append(c)
            data.append(-1.0)
    total = int(np.prod(shape))
    mat = coo_matrix(
        (np.asarray(data) / (2.0 * grid.h), (rows, cols)),
        shape=(total, len(free_lin)),
    )
    return mat.tocsr()


def spectral_oracle_p2(dom, bc, h, collar_width=None, dense_limit=3200):
    """Exact discrete suprema of the p=2 ratios on the collar space.

    Assembles the gradient form A and the div+curl form B for fields
    supported on {member, dist >= collar_width - 2h} with zero padding
    and verifies A = B entrywise (the discrete integration-by-parts
    identity), which pins the gradient-vs-div+curl constant at exactly 1.
    The reported max_ratio sqrt(1 + 1/mu1) uses the smallest eigenvalue
    mu1 of the scalar difference Laplacian on the free nodes: it is the
    exact supremum of sqrt((||v||^2 + ||grad v||^2) / (||div v||^2 +
    ||curl v||^2)) over the constrained space.
    """
    from scipy.sparse import block_diag, csr_matrix, hstack

    grid = build_grid(dom, h, pad=2.0 * h)
    if collar_width is None:
        collar_width = default_collar_width(dom, h)
    free = grid.member & (grid.dist >= collar_width - 2.0 * h)
    nfree = int(free.sum())
    if nfree == 0:
        raise ValueError("collar leaves no free nodes; shrink the width")
    n = grid.n
    dmats = [_central_diff_matrix(grid, free, ax) for ax in range(n)]
    lap = sum(d.T @ d for d in dmats)
    grad_form = block_diag([lap] * n).tocsr()
    div_op = hstack(dmats)
    if n == 2:
        curl_ops = [hstack([-dmats[1], dmats[0]])]
    else:
        zero = csr_matrix(dmats[0].shape)
        curl_ops = [
            hstack([zero, -dmats[2], dmats[1]]),
            hstack([dmats[2], zero, -dmats[0]]),
            hstack([-dmats[1], dmats[0], zero]),
        ]
    divcurl_form = (div_op.T @ div_op).tocsr()
    for c in curl_ops:
        divcurl_form = divcurl_form + c.T @ c
    identity_gap = abs(grad_form - divcurl_form).max()

    if nfree <= dense_limit:
        from scipy.linalg import eigh

        evals, evecs = eigh(lap.toarray())
        mu1 = float(evals[0])
        vec = evecs[:, 0]
    else:
        from scipy.sparse.linalg import eigsh

        evals, evecs = eigsh(lap.tocsc(), k=1, sigma=0.0, which="LM")
        mu1 = float(evals[0])
        vec = evecs[:, 0]
    if mu1 <= 0.0:
        raise ValueError("singular constraint space: nonpositive eigenvalue")
    vals = np.zeros(grid.shape + (n,))
    comp0 = np.zeros(grid.shape)
    comp0[free] = vec
    vals[..., 0] = comp0
    eigenfield = GridField(
        grid=grid,
        values=vals,
        meta={"bc": bc, "oracle": "p2", "mu1": mu1},
    )
    return {
        "bc": bc,
        "h": float(grid.h),
        "collar_width": float(collar_width),
        "free_nodes": nfree,
        "identity_gap": float(identity_gap),
        "gaffney_grad_constant_p2": 1.0,
        "mu1": mu1,
        "max_ratio": math.sqrt(1.0 + 1.0 / mu1),
        "eigenfield": eigenfield,
        "dense": nfree <= dense_limit,
    }


# -- contradiction witness scan ------------------------------------------------


def witness_scan(dom, count=1000, seed=0, tol=1e-6, h=None, bc="normal_zero", kmax=3):
    """Scan seeded fields for unbounded-direction candidates.

    A candidate has div and curl norms together below tol times its
    W^{1,2} norm; on a simply connected domain such a field must be the
    zero field, so after normalizing each sample to unit W^{1,2} norm any
    candidate with norm above WITNESS_EPS is reported as a violation.
    """
    if h is None:
        h = 1.0 / 64.0
    grid = build_grid(dom, h, pad=2.0 * h)
    basis = build_lab_basis(dom, grid, bc, kmax=kmax)
    rng = np.random.default_rng(seed)
    w = grid.cell_measure()
    matches = 0
    violations = 0
    worst = 0.0
    for _ in range(count):
        c = rng.standard_normal(basis.size)
        vals, grads, divs, curls = basis.combo(c)
        parts = ratio_parts(vals, grads, divs, curls, 2, w)
        if parts["w1p"] == 0.0:
            continue
        scale = 1.0 / parts["w1p"]
        den = (parts["div_lp"] + parts["curl_lp"]) * scale
        worst = max(worst, 1.0 / den if den > 0 else math.inf)
        if den <= tol:
            matches += 1
            # after normalization the W norm is 1, far above eps_w, so a
            # nonzero candidate is automatically a violation
            violations += 1
    return {
        "count": count,
        "tol": tol,
        "eps_w": WITNESS_EPS,
        "matches": matches,
        "violations": violations,
        "max_gaffney_ratio_seen": worst,
    }


# -- prefractal study ----------------------------------------------------------


def koch_level_study(
    levels,
    bcs,
    ps,
    out_path,
    samples=8,
    seed=0,
    kmax=2,
    ascent_iters=24,
):
    """Gaffney ratio versus prefractal level, written as a CSV study."""
    from .domains import gallery

    rows = []
    for level in levels:
        dom = gallery("koch_snowflake", level=level)
        h = max(1.0 / 160.0, 3.0**-level / 8.0)
        h = min(h, 1.0 / 48.0)
        for bc in bcs:
            grid = build_grid(dom, h, pad=2.0 * h)
            basis = build_lab_basis(dom, grid, bc, kmax=kmax)
            for p in ps:
                est = estimate_constant(
                    dom,
                    "gaffney",
                    bc,
                    p=p,
                    samples=samples,
                    seed=seed,
                    ascent_iters=ascent_iters,
                    basis=basis,
                )
                rows.append(
                    {
                        "level": level,
                        "bc": bc,
                        "p": p,
                        "max_ratio": est.max_ratio,
                        "basis_size": est.basis_size,
                        "h": basis.grid.h,
                        "boundary_dim": dom.boundary_dim,
                    }
                )
    lines = ["level,bc,p,max_ratio,basis_size,h,boundary_dim"]
    for r in rows:
        lines.append(
            "%d,%s,%.12g,%.12g,%d,%.12g,%.12g"
            % (
                r["level"],
                r["bc"],
                r["p"],
                r["max_ratio"],
                r["basis_size"],
                r["h"],
                r["boundary_dim"],
            )
        )
    text = "\n".join(lines) + "\n"
    with open(out_path, "w") as fh:
        fh.write(text)
    return rows
