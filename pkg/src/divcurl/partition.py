"""Smooth partition of unity subordinate to the enlarged small cubes.

Each selected complement cube Q (edge l, center c) carries a tensor-product
bump psi(x) = prod_i g((x_i - c_i) / (l/2)) where g is 1 on |t| <= 1, 0 on
|t| >= 17/16 and joins with the C-infinity step h(s) = f(s)/(f(s)+f(1-s)),
f(s) = exp(-1/s).  The partition functions are phi_j = psi_j / M(D) where
D = sum_k psi_k and M is a smooth cap with M(D) = D for D >= 1 and
M(D) = 1 for D <= 1/2, so M >= 1/2 everywhere and no denominator floor is
ever active.  Every point of a selected cube has its own bump equal to 1
there, hence D >= 1 and the phi_j sum to exactly 1 on the cube union; at
the outer fringe of the supports the phi_j taper smoothly to 0 rather
than jumping where a raw psi_j / D quotient would.  Gradients are
closed-form.
"""

from dataclasses import dataclass

import numpy as np

SUPPORT = 17.0 / 16.0
DEN_FLOOR = 1e-14


def _f(s):
    out = np.zeros_like(s)
    pos = s > 0.0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def _fprime(s):
    out = np.zeros_like(s)
    pos = s > 0.0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / s[pos]) / (s[pos] * s[pos])
    return out


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=np.float64)
    a = _f(s)
    b = _f(1.0 - s)
    return a / (a + b + np.where(a + b == 0.0, 1.0, 0.0))


def smoothstep_prime(s):
    s = np.asarray(s, dtype=np.float64)
    a = _f(s)
    b = _f(1.0 - s)
    ap = _fprime(s)
    bp = _fprime(1.0 - s)
    den = (a + b) ** 2
    den = np.where(den == 0.0, 1.0, den)
    return (ap * b + a * bp) / den


def profile(t):
    """1 on |t| <= 1, 0 on |t| >= 17/16, smooth in between."""
    return smoothstep((SUPPORT - np.abs(t)) * 16.0)


def profile_prime(t):
    t = np.asarray(t, dtype=np.float64)
    return -np.sign(t) * 16.0 * smoothstep_prime((SUPPORT - np.abs(t)) * 16.0)


def den_cap(d, deriv=True):
    """Smooth cap M with M = 1 below 1/2, M = d above 1; returns (M, M').

    deriv=False skips M' and returns (M, None) — the derivative is a
    full-size array the caller may not need.
    """
    d = np.asarray(d, dtype=np.float64)
    b = smoothstep(2.0 * d - 1.0)
    m = b * d + (1.0 - b)
    if not deriv:
        return m, None
    bp = 2.0 * smoothstep_prime(2.0 * d - 1.0)
    mp = bp * d + b - bp
    return m, mp


@dataclass
class PartitionOfUnity:
    centers: np.ndarray
    half: np.ndarray  # l/2 per bump
    w3_positions: list

    @property
    def n(self):
        return self.centers.shape[1]

    def support_bounds(self, row):
        r = SUPPORT * self.half[row]
        return self.centers[row] - r, self.centers[row] + r

    def psi(self, row, pts):
        """Bump value of one member at points (..., n)."""
        pts = np.asarray(pts, dtype=np.float64)
        t = (pts - self.centers[row]) / self.half[row]
        return np.prod(profile(t), axis=-1)

    def psi_grad(self, row, pts):
        pts = np.asarray(pts, dtype=np.float64)
        t = (pts - self.centers[row]) / self.half[row]
        g = profile(t)
        gp = profile_prime(t) / self.half[row]
        val = np.prod(g, axis=-1)
        grad = np.empty_like(t)
        for i in range(self.n):
            others = np.prod(np.delete(g, i, axis=-1), axis=-1)
            grad[..., i] = gp[..., i] * others
        return val, grad

    def members_near(self, x):
        """Rows whose support contains x (small fixed neighborhood)."""
        x = np.asarray(x, dtype=np.float64)
        r = SUPPORT * self.half
        inside = np.all(np.abs(x[None, :] - self.centers) <= r[:, None], axis=1)
        return np.nonzero(inside)[0]


def build_partition(w2, w3_positions):
    lo, hi = w2.bounds()
    lo = lo[w3_positions]
    hi = hi[w3_positions]
    return PartitionOfUnity(
        centers=(lo + hi) / 2.0,
        half=(hi - lo)[:, 0] / 2.0,
        w3_positions=list(w3_positions),
    )


def eval_partition(pu, x):
    """[(row, phi_row(x), grad phi_row(x))] for the bumps alive at x."""
    x = np.asarray(x, dtype=np.float64)
    rows = pu.members_near(x)
    if len(rows) == 0:
        return []
    vals = np.empty(len(rows))
    grads = np.empty((len(rows), pu.n))
    for i, row in enumerate(rows):
        vals[i], grads[i] = pu.psi_grad(row, x)
    den = vals.sum()
    dgrad = grads.sum(axis=0)
    m, mp = den_cap(den)
    m = float(m)
    mp = float(mp)
    out = []
    for i, row in enumerate(rows):
        phi = vals[i] / m
        grad = grads[i] / m - vals[i] * mp * dgrad / m**2
        out.append((int(row), float(phi), grad))
    return out


def partition_sum(pu, pts):
    """(sum of phi, sum of psi) over all members at points.

    Only bumps whose support can reach each point are evaluated, via a
    KD-tree over the query points.
    """
    from scipy.spatial import cKDTree

    pts = np.asarray(pts, dtype=np.float64).reshape(-1, pu.n)
    den = np.zeros(len(pts))
    tree = cKDTree(pts)
    sqrt_n = np.sqrt(float(pu.n))
    for row in range(len(pu.half)):
        r = SUPPORT * pu.half[row] * sqrt_n
        idx = tree.query_ball_point(pu.centers[row], r)
        if idx:
            den[idx] += pu.psi(row, pts[idx])
    m, _ = den_cap(den)
    return den / m, den
