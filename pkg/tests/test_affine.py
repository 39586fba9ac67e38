"""Affine vector polynomials fitted on cube windows: symmetrized mean
gradient, mean-zero residual, gradient comparability, and chain
differences."""

import numpy as np
import pytest

from divcurl.affine import (
    AffinePolynomial,
    chain_derivatives,
    chain_difference,
    fit_affine,
    fit_affine_batch,
    gradient_comparison,
    polynomial_lp,
    residual_report,
    window_mask,
)
from divcurl.extension import build_extension_geometry
from divcurl.fields import GridField, build_grid, generate_test_field
from divcurl.reflection import build_chains, build_reflection
from divcurl.whitney import select_w3


@pytest.fixture(scope="module")
def setup(wcache):
    dom = wcache.domain("unit_square")
    geo = build_extension_geometry(dom, 7)
    grid = build_grid(dom, 1 / 256)
    return dom, geo, grid


def _star_window(geo, grid, k=0):
    pos = geo.refl.star[k]
    return window_mask(grid, geo.w1.root, [geo.w1.cubes[pos]])


class TestHandCraftedFits:
    def test_linear_field_recovers_symmetrized_gradient(self, setup):
        dom, geo, grid = setup
        mask = _star_window(geo, grid)
        X = grid.points()
        M = np.array([[1.0, 2.0], [0.0, -1.0]])
        x0 = np.array([0.3, 0.4])
        b = np.array([0.5, -0.2])
        u = GridField(grid, (X - x0) @ M.T + b, {})
        poly = fit_affine(u, mask)
        sym = 0.5 * (M + M.T)
        assert np.allclose(poly.B, sym, rtol=0, atol=1e-12)
        assert poly.trace() == pytest.approx(np.trace(M), abs=1e-12)
        # value at the window barycenter equals the window mean
        sel = mask & grid.member
        assert np.allclose(poly(poly.xbar[None, :])[0], u.values[sel].mean(axis=0), atol=1e-12)

    def test_rotation_has_zero_symmetric_part(self, setup):
        dom, geo, grid = setup
        mask = _star_window(geo, grid)
        X = grid.points()
        rot = GridField(grid, np.stack([-X[..., 1], X[..., 0]], axis=-1), {})
        poly = fit_affine(rot, mask)
        assert np.abs(poly.B).max() <= 1e-13
        assert poly.grad_inf() <= 1e-13

    def test_symmetry_is_structural(self, setup):
        dom, geo, grid = setup
        v = generate_test_field(dom, grid, "none", seed=3, collar_width=0.012)
        for k in (0, 5, 11):
            poly = fit_affine(v, _star_window(geo, grid, k))
            assert np.array_equal(poly.B, poly.B.T)


class TestResiduals:
    def test_mean_residual_is_roundoff(self, setup):
        dom, geo, grid = setup
        mask = _star_window(geo, grid)
        worst = 0.0
        for seed in range(5):
            v = generate_test_field(dom, grid, "none", seed=seed, collar_width=0.012)
            rep = residual_report(v, mask, fit_affine(v, mask))
            worst = max(worst, rep["mean_residual"] / np.abs(v.values).max())
        assert worst <= 1e-12

    def test_poincare_quotient_on_a_quadratic(self, setup):
        dom, geo, grid = setup
        pos = geo.refl.star[0]
        ell = geo.w1.root.cell_size(geo.w1.cubes[pos].level)
        g = build_grid(dom, ell / 32.0, cache=False)
        X = g.points()
        u = GridField(g, np.stack([X[..., 1] ** 2, np.zeros(g.shape)], axis=-1), {})
        mask = window_mask(g, geo.w1.root, [geo.w1.cubes[pos]])
        rep = residual_report(u, mask, fit_affine(u, mask))
        assert rep["poincare_ratio"] == pytest.approx(0.14815381, abs=1e-6)
        assert rep["nodes"] >= 33**2

    def test_report_keys(self, setup):
        dom, geo, grid = setup
        mask = _star_window(geo, grid)
        v = generate_test_field(dom, grid, "none", seed=1, collar_width=0.012)
        rep = residual_report(v, mask, fit_affine(v, mask))
        assert set(rep) >= {
            "mean_residual",
            "poincare_ratio",
            "residual_norm",
            "grad_norm",
            "diam",
            "nodes",
        }


class TestGradientComparability:
    def test_polynomial_gradient_below_field_gradient(self, setup):
        dom, geo, grid = setup
        uniq = sorted(set(int(s) for s in geo.refl.star))[::8]
        masks = [window_mask(grid, geo.w1.root, [geo.w1.cubes[p]]) for p in uniq]
        worst = 0.0
        for seed in range(10):
            v = generate_test_field(dom, grid, "none", seed=seed, collar_width=0.012)
            for mask, poly in zip(masks, fit_affine_batch(v, masks)):
                r = gradient_comparison(v, mask, poly)
                assert set(r) == {"grad_inf_poly", "grad_inf_field", "ratio"}
                worst = max(worst, r["ratio"])
        assert worst <= 1.02


class TestChainDifference:
    @pytest.fixture(scope="class")
    def chains(self, wcache):
        dom = wcache.domain("unit_square")
        w1, w2 = wcache.pair("unit_square", 7)
        w3 = wcache.w3("unit_square", 7)
        refl = build_reflection(w1, w2, w3)
        return w1, build_chains(w1, w2, w3, refl)

    def _battery(self, dom, w1, chains, h):
        g = build_grid(dom, h)
        v = generate_test_field(dom, g, "normal_zero", seed=6, collar_width=0.012)
        derivs = chain_derivatives(v)
        worst, nonzero, violations = 0.0, 0, 0
        for path in chains.pairs.values():
            cubes = [w1.cubes[pos] for pos in path]
            rep = chain_difference(v, w1.root, cubes, p=2, derivs=derivs)
            if np.isfinite(rep["ratio"]):
                worst = max(worst, rep["ratio"])
            nonzero += rep["lhs"] > 0
            violations += rep["violation"]
        return worst, nonzero, violations

    def test_difference_controlled_by_scaled_derivative_norms(self, wcache, chains):
        dom = wcache.domain("unit_square")
        w1, ch = chains
        worst, nonzero, violations = self._battery(dom, w1, ch, 1 / 256)
        assert violations == 0
        assert nonzero == 944
        assert worst == pytest.approx(0.473944266, abs=1e-6)

    def test_ratio_stable_under_grid_refinement(self, wcache, chains):
        dom = wcache.domain("unit_square")
        w1, ch = chains
        coarse, _, v1 = self._battery(dom, w1, ch, 1 / 256)
        fine, _, v2 = self._battery(dom, w1, ch, 1 / 512)
        assert v1 == v2 == 0
        assert abs(fine - coarse) / coarse <= 0.10

    def test_report_schema(self, wcache, chains):
        dom = wcache.domain("unit_square")
        w1, ch = chains
        g = build_grid(dom, 1 / 256)
        v = generate_test_field(dom, g, "normal_zero", seed=6, collar_width=0.012)
        path = next(iter(ch.pairs.values()))
        rep = chain_difference(v, w1.root, [w1.cubes[p] for p in path], p=2)
        assert set(rep) == {
            "lhs",
            "rhs_factor",
            "ratio",
            "lhs_inf",
            "rhs_inf_factor",
            "ratio_inf",
            "m",
            "ell",
            "violation",
        }
        assert rep["m"] == len(path)

    def test_scalar_field_rejected(self, wcache, chains):
        dom = wcache.domain("unit_square")
        w1, ch = chains
        g = build_grid(dom, 1 / 256)
        scalar = GridField(g, np.zeros(g.shape), {})
        path = next(iter(ch.pairs.values()))
        with pytest.raises(ValueError, match="chain difference needs an n-component field"):
            chain_difference(scalar, w1.root, [w1.cubes[p] for p in path])

    def test_empty_chain_rejected(self, wcache, chains):
        dom = wcache.domain("unit_square")
        w1, _ = chains
        g = build_grid(dom, 1 / 256)
        v = GridField(g, np.zeros(g.shape + (2,)), {})
        with pytest.raises(ValueError, match="empty chain"):
            chain_difference(v, w1.root, [])


class TestComparabilityOfMeans:
    def test_affine_lp_means_comparable_on_nested_squares(self):
        # random degree-1 fields over sub-squares with side >= sqrt(gamma):
        # the two-sided L2 mean ratio stays below a fixed constant
        rng = np.random.default_rng(2024)
        gamma = 0.25
        k = 24
        ratios = np.empty(1000)
        for t in range(1000):
            a = rng.normal(size=2)
            B = rng.normal(size=(2, 2))
            side_f = gamma**0.5 + (1 - gamma**0.5) * rng.random()
            side_g = gamma**0.5 + (1 - gamma**0.5) * rng.random()
            lo_f = rng.random(2) * (1 - side_f)
            lo_g = rng.random(2) * (1 - side_g)

            def mean_l2(lo, side):
                ax = lo[:, None] + side * (np.arange(k) + 0.5)[None, :] / k
                P = np.stack(np.meshgrid(ax[0], ax[1], indexing="ij"), axis=-1).reshape(-1, 2)
                vals = a + P @ B.T
                return (np.sum(np.abs(vals) ** 2) * (side / k) ** 2) ** 0.5

            r = mean_l2(lo_f, side_f) / mean_l2(lo_g, side_g)
            ratios[t] = max(r, 1.0 / r)
        assert ratios.max() <= 3.0
        assert ratios.max() == pytest.approx(2.8504, abs=2e-3)
        assert np.median(ratios) == pytest.approx(1.2623, abs=2e-3)


class TestValidation:
    def test_empty_window_rejected(self, setup):
        dom, geo, grid = setup
        v = generate_test_field(dom, grid, "none", seed=0, collar_width=0.012)
        with pytest.raises(ValueError, match="no member nodes in the fitting window"):
            fit_affine(v, np.zeros(grid.shape, dtype=bool))

    def test_degenerate_window_rejected(self, setup):
        dom, geo, grid = setup
        v = generate_test_field(dom, grid, "none", seed=0, collar_width=0.012)
        mask = np.zeros(grid.shape, dtype=bool)
        idx = tuple(s // 2 for s in grid.shape)
        mask[idx] = True
        with pytest.raises(ValueError, match="fitting window needs at least 2 nodes per axis"):
            fit_affine(v, mask)

    def test_polynomial_lp_of_a_constant(self, setup):
        dom, geo, grid = setup
        pos = geo.refl.star[0]
        cube = geo.w1.cubes[pos]
        ell = geo.w1.root.cell_size(cube.level)
        poly = AffinePolynomial(
            a=np.array([3.0, 4.0]), B=np.zeros((2, 2)), xbar=np.zeros(2)
        )
        val = polynomial_lp(poly, geo.w1.root, cube, p=2)
        assert val == pytest.approx(5.0 * ell, rel=1e-12)
