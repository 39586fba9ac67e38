"""Node-based grid fields over a domain, masked difference calculus,
Lp quadrature, and seeded test-field generators.

Grid nodes sit at origin + h * index.  The mask splits nodes into
exterior (not in the open set), shell (member with a non-member axis
neighbor) and interior (member with all axis neighbors member).
Derivatives are second-order central where both axis neighbors are
members and first-order one-sided on the shell; norms are Riemann sums
with weight h^n restricted to a node mask (interior by default).

Parameters
----------
Fields are float64 arrays shaped dims (scalar) or dims + (m,) (vector);
all operators preserve those layouts.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .cubes import root_for_domain
from .partition import smoothstep

_GRID_CACHE = {}


@dataclass
class Grid:
    n: int
    h: float
    origin: np.ndarray
    shape: tuple
    member: np.ndarray
    dist: np.ndarray

    @property
    def interior(self):
        if not hasattr(self, "_interior"):
            inter = self.member.copy()
            for ax in range(self.n):
                inter &= _shift_bool(self.member, ax, +1) & _shift_bool(self.member, ax, -1)
            self._interior = inter
        return self._interior

    @property
    def shell(self):
        return self.member & ~self.interior

    def axes(self):
        return [self.origin[i] + self.h * np.arange(self.shape[i]) for i in range(self.n)]

    def axis_grid(self, i):
        """Axis-i coordinate broadcast to the full grid shape."""
        ax = self.axes()[i]
        shape = [1] * self.n
        shape[i] = self.shape[i]
        return ax.reshape(shape)

    def points(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def window(self, lo, hi, open_box=False):
        """Index slices of nodes inside the closed (or open) box [lo, hi]."""
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        eps = 1e-9 * self.h
        if open_box:
            i0 = np.floor((lo - self.origin) / self.h + 1.0 - eps).astype(int)
            i1 = np.ceil((hi - self.origin) / self.h - 1.0 + eps).astype(int)
        else:
            i0 = np.ceil((lo - self.origin) / self.h - eps).astype(int)
            i1 = np.floor((hi - self.origin) / self.h + eps).astype(int)
        i0 = np.maximum(i0, 0)
        i1 = np.minimum(i1, np.asarray(self.shape) - 1)
        if np.any(i1 < i0):
            return None
        return tuple(slice(a, b + 1) for a, b in zip(i0, i1))

    def cell_measure(self):
        return self.h**self.n


def _shift_bool(mask, axis, step):
    out = np.zeros_like(mask)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if step > 0:
        dst[axis] = slice(0, -1)
        src[axis] = slice(1, None)
    else:
        dst[axis] = slice(1, None)
        src[axis] = slice(0, -1)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def _shift_vals(f, axis, step):
    out = np.zeros_like(f)
    src = [slice(None)] * f.ndim
    dst = [slice(None)] * f.ndim
    if step > 0:
        dst[axis] = slice(0, -1)
        src[axis] = slice(1, None)
    else:
        dst[axis] = slice(1, None)
        src[axis] = slice(0, -1)
    out[tuple(dst)] = f[tuple(src)]
    return out


_NODE_CHUNK = 4_000_000


def _node_chunks(nodes):
    for i0 in range(0, nodes, _NODE_CHUNK):
        yield i0, min(i0 + _NODE_CHUNK, nodes)


def _chunk_points(axes, shape, i0, i1):
    """Coordinates of flat-index nodes [i0, i1) without the full mesh."""
    idx = np.unravel_index(np.arange(i0, i1), shape)
    return np.stack([axes[d][idx[d]] for d in range(len(shape))], axis=1)


def build_grid(dom, h, pad=None, cache=True):
    """Sample the domain mask and boundary distance on a regular grid."""
    if pad is None:
        # Small exterior cubes have side <= eps*delta/16n and sit within
        # C*side of the boundary; the bump tails add another 9/16 side.
        # 5.2*sqrt(n) sides of margin covers the whole taper zone.
        pad = 0.325 * dom.epsilon * dom.delta / math.sqrt(float(dom.n)) + 6 * h
    key = (dom.cache_key(), float(h), round(float(pad), 12))
    if cache and key in _GRID_CACHE:
        return _GRID_CACHE[key]
    lo, hi = dom.bounding_box(pad=0.0)
    # Anchor the node lattice on the dyadic cube lattice: cube faces then
    # fall exactly on node planes (all coordinates dyadic), so sampled
    # statistics carry no alignment phase between resolutions.
    anchor = np.asarray(root_for_domain(dom).origin, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    origin = anchor + h * np.floor((lo - pad - anchor) / h)
    shape = tuple(int(np.ceil((hi[i] + pad - origin[i]) / h)) + 1 for i in range(dom.n))
    axes = [origin[i] + h * np.arange(shape[i]) for i in range(dom.n)]
    nodes = int(np.prod(shape))
    member = np.empty(nodes, dtype=bool)
    dist = np.empty(nodes)
    for i0, i1 in _node_chunks(nodes):
        pts = _chunk_points(axes, shape, i0, i1)
        member[i0:i1] = dom.membership(pts)
        dist[i0:i1] = dom.boundary_distance(pts)
    member = member.reshape(shape)
    dist = dist.reshape(shape)
    g = Grid(n=dom.n, h=float(h), origin=origin, shape=shape, member=member, dist=dist)
    if cache:
        _GRID_CACHE[key] = g
    return g


def clear_grid_cache():
    _GRID_CACHE.clear()


@dataclass
class GridField:
    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def ncomp(self):
        return 1 if self.values.ndim == self.grid.n else self.values.shape[-1]

    def component(self, i):
        return self.values if self.values.ndim == self.grid.n else self.values[..., i]


# -- masked difference operators ---------------------------------------------


def masked_diff(f, member, axis, h):
    """d f / d x_axis with the mask rules; zero where undefined.

    Works on axis slabs so no full-size shifted copy of f is ever made
    (the shifted-copy form doubles the footprint on fine 3D grids).
    """
    out = np.zeros_like(f)
    if f.shape[axis] < 2:
        return out
    full = [slice(None)] * f.ndim

    def sl(a, b):
        s = list(full)
        s[axis] = slice(a, b)
        return tuple(s)

    mid, up, dn = sl(1, -1), sl(2, None), sl(None, -2)
    m0, mu, md = member[mid], member[up], member[dn]
    f0, fu, fd = f[mid], f[up], f[dn]
    o = out[mid]
    both = m0 & mu & md
    o[both] = (fu[both] - fd[both]) / (2.0 * h)
    fwd = m0 & mu & ~md
    o[fwd] = (fu[fwd] - f0[fwd]) / h
    bwd = m0 & ~mu & md
    o[bwd] = (f0[bwd] - fd[bwd]) / h
    first, second = sl(0, 1), sl(1, 2)
    edge = member[first] & member[second]
    out[first][edge] = (f[second][edge] - f[first][edge]) / h
    last, prev = sl(-1, None), sl(-2, -1)
    edge = member[last] & member[prev]
    out[last][edge] = (f[last][edge] - f[prev][edge]) / h
    return out


def isolated_nodes(grid):
    """Member nodes with no member neighbor along some axis (flagged)."""
    bad = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.n):
        ok = _shift_bool(grid.member, ax, +1) | _shift_bool(grid.member, ax, -1)
        bad |= grid.member & ~ok
    return bad


def gradient(fld):
    """Full Jacobian: out[..., i, j] = d v_i / d x_j (vector) or (..., j)."""
    g = fld.grid
    if fld.values.ndim == g.n:
        out = np.empty(g.shape + (g.n,))
        for j in range(g.n):
            out[..., j] = masked_diff(fld.values, g.member, j, g.h)
        return out
    m = fld.values.shape[-1]
    out = np.empty(g.shape + (m, g.n))
    for i in range(m):
        for j in range(g.n):
            out[..., i, j] = masked_diff(fld.values[..., i], g.member, j, g.h)
    return out


def divergence(fld):
    g = fld.grid
    out = np.zeros(g.shape)
    for i in range(g.n):
        out += masked_diff(fld.values[..., i], g.member, i, g.h)
    return out


def curl(fld):
    """Scalar d1 v2 - d2 v1 in 2D; the usual vector curl in 3D."""
    g = fld.grid
    v = fld.values
    if g.n == 2:
        return masked_diff(v[..., 1], g.member, 0, g.h) - masked_diff(v[..., 0], g.member, 1, g.h)
    out = np.empty(g.shape + (3,))
    out[..., 0] = masked_diff(v[..., 2], g.member, 1, g.h) - masked_diff(v[..., 1], g.member, 2, g.h)
    out[..., 1] = masked_diff(v[..., 0], g.member, 2, g.h) - masked_diff(v[..., 2], g.member, 0, g.h)
    out[..., 2] = masked_diff(v[..., 1], g.member, 0, g.h) - masked_diff(v[..., 0], g.member, 1, g.h)
    return out


def plain_diff(f, axis, h):
    """Unmasked central difference with zero padding (commuting operators)."""
    return (_shift_vals(f, axis, +1) - _shift_vals(f, axis, -1)) / (2.0 * h)


# -- quadrature ---------------------------------------------------------------


def lp_norm(values, p, mask, h, n, weights=None):
    """(sum over mask of |values|^p * h^n)^(1/p); component axes flattened.

    Optional node weights make the sum a trapezoid-style quadrature; the
    sup norm ignores them.
    """
    extra = values.ndim - mask.ndim
    v = values[mask]
    if extra:
        v = v.reshape(len(v), -1)
    if v.size == 0:
        return 0.0
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(v)))
    if p <= 0:
        raise ValueError("p must be positive or inf")
    a = np.abs(v) ** p
    if weights is not None:
        w = weights[mask]
        a = a * (w[:, None] if extra else w)
    return float((np.sum(a) * h**n) ** (1.0 / p))


def field_lp(fld, p, mask=None):
    mask = fld.grid.interior if mask is None else mask
    return lp_norm(fld.values, p, mask, fld.grid.h, fld.grid.n)


def norm_bundle(fld, p, mask=None):
    """All norms the inequality ratios need, in one pass."""
    g = fld.grid
    mask = g.interior if mask is None else mask
    grad = gradient(fld)
    out = {
        "lp": lp_norm(fld.values, p, mask, g.h, g.n),
        "grad_lp": lp_norm(grad, p, mask, g.h, g.n),
        "div_lp": lp_norm(divergence(fld), p, mask, g.h, g.n),
        "curl_lp": lp_norm(curl(fld), p, mask, g.h, g.n),
    }
    if p == np.inf or p == "inf":
        out["w1p"] = max(out["lp"], out["grad_lp"])
    else:
        out["w1p"] = (out["lp"] ** p + out["grad_lp"] ** p) ** (1.0 / p)
    return out


# -- collar cutoff and band-limited test fields -------------------------------


def _collar_step(u):
    """C2 quintic step: 0 below 0, 1 above 1.

    Chosen over the exponential C-infinity step for collar ramps: the
    exponential profile's high derivatives are huge relative to its low
    ones, so difference quotients across a ramp of width W only settle
    for h << W/30; the quintic's settle by h ~ W/10.  Its curvature
    peaks inside the ramp and vanishes at both ends, so sampled sup
    norms converge at second order.
    """
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10.0 + u * (6.0 * u - 15.0))


def _collar_step_prime(u):
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    return 30.0 * u * u * (1.0 - u) * (1.0 - u)


def collar_cutoff(grid, width, coord=None):
    """Smooth mask: 0 within `width` of the boundary, 1 well inside.

    chi is a fixed smooth ramp in a boundary coordinate, rising from 0
    at width to 1 at 2 * width.  Being a function of the coordinate
    alone, the sampled values do not depend on the grid step, so
    refinement studies see one underlying field.  `coord` defaults to
    the exact boundary distance; pass a softened coordinate when the
    cutoff must be differentiated (the exact distance field has gradient
    kinks on the set equidistant from two boundary pieces).
    """
    h = grid.h
    if width < 2.0 * h:
        raise ValueError("collar width must be at least 2 h")
    if width >= float(np.max(grid.dist)):
        raise ValueError("collar thicker than the domain inradius")
    coord = grid.dist if coord is None else coord
    chi = _collar_step((coord - width) / width)
    chi[~grid.member] = 0.0
    return chi


_SOFT_CACHE = {}


# grids whose (soft, gsoft) pair exceeds this many bytes are recomputed per
# call instead of parked in the cache (fine 3D grids would pin gigabytes)
_SOFT_CACHE_BYTES = 400_000_000


def _soft_coord(dom, grid, width):
    """Softened boundary coordinate and gradient for collars.

    Potentials are cut off and then differentiated, so the cutoff needs
    one more derivative than the exact distance field offers: quotients
    across its kink lines grow like 1/h and never settle.  The softmin
    coordinate trades at most ~0.7 * width of depth for C1 smoothness.

    Returns (soft, gsoft, owned).  owned=True means the arrays are the
    caller's to mutate; owned=False means they are shared with the cache.
    """
    s = width
    key = (
        dom.cache_key(),
        float(grid.h),
        tuple(grid.shape),
        tuple(float(x) for x in grid.origin),
        round(s, 15),
    )
    if key in _SOFT_CACHE:
        soft, gsoft = _SOFT_CACHE[key]
        return soft, gsoft, False
    axes = grid.axes()
    nodes = int(np.prod(grid.shape))
    soft = np.empty(nodes)
    gsoft = np.empty((nodes, grid.n))
    for i0, i1 in _node_chunks(nodes):
        pts = _chunk_points(axes, grid.shape, i0, i1)
        soft[i0:i1], gsoft[i0:i1] = dom.soft_boundary_distance(pts, s, grad=True)
    soft = soft.reshape(grid.shape)
    gsoft = gsoft.reshape(grid.shape + (grid.n,))
    if soft.nbytes + gsoft.nbytes <= _SOFT_CACHE_BYTES:
        _SOFT_CACHE[key] = (soft, gsoft)
        return soft, gsoft, False
    return soft, gsoft, True


def _mode_table(n, modes, seed, kmax=4):
    rng = np.random.default_rng(seed)
    zs = np.zeros((modes, n), dtype=int)
    for i in range(modes):
        z = np.zeros(n, dtype=int)
        while not z.any():
            z = rng.integers(-kmax, kmax + 1, size=n)
        zs[i] = z
    amp = rng.standard_normal(modes)
    phase = rng.uniform(0.0, 2.0 * np.pi, modes)
    return zs, amp, phase


def _eval_modes(grid, zs, amp, phase, extent):
    out = np.zeros(grid.shape)
    ph = np.empty(grid.shape)
    buf = np.empty(grid.shape)
    for z, a, th in zip(zs, amp, phase):
        ph.fill(th)
        for i in range(grid.n):
            if z[i]:
                ph += (2.0 * np.pi * z[i] / extent) * grid.axis_grid(i)
        np.cos(ph, out=buf)
        buf *= a
        out += buf
    return out


def _eval_modes_grad(grid, zs, amp, phase, extent):
    """Band-limited scalar and its exact gradient.

    Scratch buffers are reused across modes: the temporaries would
    otherwise dominate the footprint on fine 3D grids.
    """
    val = np.zeros(grid.shape)
    grd = np.zeros(grid.shape + (grid.n,))
    ph = np.empty(grid.shape)
    buf = np.empty(grid.shape)
    for z, a, th in zip(zs, amp, phase):
        ph.fill(th)
        k = np.zeros(grid.n)
        for i in range(grid.n):
            if z[i]:
                k[i] = 2.0 * np.pi * z[i] / extent
                ph += k[i] * grid.axis_grid(i)
        np.cos(ph, out=buf)
        buf *= a
        val += buf
        np.sin(ph, out=ph)
        ph *= a  # ph now holds a * sin(phase)
        for i in range(grid.n):
            if k[i]:
                np.multiply(ph, k[i], out=buf)
                grd[..., i] -= buf
    return val, grd


_COLLAR_RAMP = 4.0  # ramp length in collar widths; must stay well-resolved


def _collar_potential_grad(dom, grid, width, zs, amp, phase, extent, ramp=None):
    """Exact gradient of psi = chi(soft coordinate) * band-limited scalar.

    Everything is differentiated in closed form, so the sampled field is
    one fixed continuum field regardless of the grid step and discrete
    identities on it (div of a rotated gradient, curl of a gradient)
    hold at O(h^2) rather than by construction.  chi vanishes where the
    soft coordinate is below `width` and rises over a ramp several
    widths long; a ramp as narrow as the collar itself would put the
    profile curvature below the coarse grid scale again.
    """
    soft, gsoft, owned = _soft_coord(dom, grid, width)
    if ramp is None:
        ramp = _COLLAR_RAMP * width
    u = (soft - width) / ramp
    chi = _collar_step(u)
    fac = (_collar_step_prime(u) / ramp)[..., None]
    if owned:
        gsoft *= fac
        dchi = gsoft
    else:
        dchi = gsoft * fac
    soft = gsoft = u = fac = None
    pot, dpot = _eval_modes_grad(grid, zs, amp, phase, extent)
    dpot *= chi[..., None]
    dchi *= pot[..., None]
    dpot += dchi
    return dpot


def generate_test_field(dom, grid, bc, seed, modes=12, collar_width=None, ramp=None):
    """Seeded band-limited vector field honoring the boundary flavor.

    bc='normal_zero' builds the rotated gradient of a cut-off stream
    potential (n=3: the curl of a cut-off vector potential), so the
    divergence vanishes; 'tangential_zero' the gradient of a cut-off
    potential, so the curl vanishes; 'none' a free band-limited field
    masked to the domain.  The potential gradients are evaluated in
    closed form at the nodes.  `ramp` stretches the cutoff rise beyond
    the zero collar; longer ramps make a smoother field near the
    boundary (refinement studies want the rise resolved at the coarsest
    grid in the pair).
    """
    if bc not in ("normal_zero", "tangential_zero", "none"):
        raise ValueError("bc must be normal_zero, tangential_zero or none")
    g = grid
    # frequency scale pinned to the domain box, not the grid box: padded
    # grid extents move with the step, and a step-dependent scale would
    # make refinement pairs sample two different continuum fields
    blo, bhi = dom.bounding_box(pad=0.0)
    extent = float(np.max(np.asarray(bhi) - np.asarray(blo)))
    if collar_width is None:
        collar_width = max(4.0 * g.h, 0.06 * extent)
    if ramp is not None and ramp <= 0.0:
        raise ValueError("ramp must be positive")
    meta = {
        "bc": bc,
        "seed": int(seed),
        "modes": int(modes),
        "collar_width": float(collar_width),
        "ramp": float(ramp) if ramp is not None else _COLLAR_RAMP * float(collar_width),
    }
    if bc == "none":
        vals = np.empty(g.shape + (g.n,))
        for i in range(g.n):
            zs, amp, phase = _mode_table(g.n, modes, seed * 101 + 7 * i + 1)
            vals[..., i] = _eval_modes(g, zs, amp, phase, extent)
        vals[~g.member] = 0.0
        return GridField(grid=g, values=vals, meta=meta)
    if collar_width < 2.0 * g.h:
        raise ValueError("collar width must be at least 2 h")
    if collar_width >= float(np.max(g.dist)):
        raise ValueError("collar thicker than the domain inradius")
    if bc == "tangential_zero":
        zs, amp, phase = _mode_table(g.n, modes, seed * 101 + 3)
        vals = _collar_potential_grad(
            dom, g, collar_width, zs, amp, phase, extent, ramp=ramp
        )
        vals[~g.member] = 0.0
        return GridField(grid=g, values=vals, meta=meta)
    if g.n == 2:
        zs, amp, phase = _mode_table(2, modes, seed * 101 + 5)
        dpsi = _collar_potential_grad(
            dom, g, collar_width, zs, amp, phase, extent, ramp=ramp
        )
        vals = np.stack([-dpsi[..., 1], dpsi[..., 0]], axis=-1)
        vals[~g.member] = 0.0
        return GridField(grid=g, values=vals, meta=meta)
    da = []
    for i in range(3):
        zs, amp, phase = _mode_table(3, modes, seed * 101 + 11 + 13 * i)
        da.append(
            _collar_potential_grad(
                dom, g, collar_width, zs, amp, phase, extent, ramp=ramp
            )
        )
    vals = np.stack(
        [
            da[2][..., 1] - da[1][..., 2],
            da[0][..., 2] - da[2][..., 0],
            da[1][..., 0] - da[0][..., 1],
        ],
        axis=-1,
    )
    vals[~g.member] = 0.0
    return GridField(grid=g, values=vals, meta=meta)


def green_residual(u, v_values):
    """|sum over nodes (u . grad v + v div u) h^n| for compactly supported u."""
    g = u.grid
    acc = np.zeros(g.shape)
    for i in range(g.n):
        acc += u.values[..., i] * plain_diff(v_values, i, g.h)
        acc += v_values * plain_diff(u.values[..., i], i, g.h)
    return abs(float(acc.sum()) * g.cell_measure())


# -- binary dump with JSON sidecar -------------------------------------------


def save_field(fld, path_prefix):
    vals = np.ascontiguousarray(fld.values, dtype=np.float64)
    vals.tofile(str(path_prefix) + ".bin")
    sidecar = {
        "n": fld.grid.n,
        "h": fld.grid.h,
        "origin": [float(o) for o in fld.grid.origin],
        "dims": list(fld.grid.shape),
        "components": fld.ncomp,
        "meta": fld.meta,
    }
    with open(str(path_prefix) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_field(path_prefix, dom):
    with open(str(path_prefix) + ".json") as fh:
        side = json.load(fh)
    dims = tuple(side["dims"])
    m = side["components"]
    vals = np.fromfile(str(path_prefix) + ".bin", dtype=np.float64)
    expect = int(np.prod(dims)) * m
    if vals.size != expect:
        raise ValueError("field payload does not match sidecar dims")
    vals = vals.reshape(dims + (m,)) if m > 1 else vals.reshape(dims)
    if dom.n != side["n"]:
        raise ValueError("field dimension does not match the domain")
    lo, _ = dom.bounding_box(pad=0.0)
    pad_used = float(lo[0] - side["origin"][0])
    g = build_grid(dom, side["h"], pad=pad_used)
    if tuple(g.shape) != dims or not np.allclose(g.origin, side["origin"]):
        raise ValueError("field grid does not match the domain grid")
    return GridField(grid=g, values=vals, meta=side.get("meta", {}))
