"""Grid calculus: masked difference operators, norms, boundary-adapted
field generation, and the summation-by-parts residual."""

import numpy as np
import pytest

from divcurl.domains import gallery
from divcurl.fields import (
    GridField,
    build_grid,
    curl,
    divergence,
    field_lp,
    generate_test_field,
    gradient,
    green_residual,
    isolated_nodes,
    load_field,
    lp_norm,
    save_field,
)


@pytest.fixture(scope="module")
def dom():
    return gallery("unit_square")


@pytest.fixture(scope="module")
def g256(dom):
    return build_grid(dom, 1 / 256)


@pytest.fixture(scope="module")
def g128(dom):
    return build_grid(dom, 1 / 128)


class TestNorms:
    def test_constant_one_l2_error_is_two_h(self, g256):
        ones = np.ones(g256.shape)
        n2 = lp_norm(ones, 2, g256.interior, g256.h, g256.n)
        err = abs(n2 - 1.0)
        assert err <= 2.5 * g256.h
        assert err == pytest.approx(2.0 * g256.h, abs=1e-6)

    def test_linf_is_exact_on_a_spike(self, g256):
        spike = np.zeros(g256.shape)
        spike[tuple(s // 2 for s in g256.shape)] = 7.0
        assert lp_norm(spike, np.inf, g256.interior, g256.h, g256.n) == 7.0

    def test_smooth_l2_error_first_order(self, dom, g256):
        X = g256.points()
        v = lp_norm(np.sin(np.pi * X[..., 0]), 2, g256.interior, g256.h, g256.n)
        err_coarse = abs(v - 1.0 / np.sqrt(2.0))
        assert err_coarse <= 3.5e-3
        g512 = build_grid(dom, 1 / 512, cache=False)
        X = g512.points()
        v = lp_norm(np.sin(np.pi * X[..., 0]), 2, g512.interior, g512.h, g512.n)
        err_fine = abs(v - 1.0 / np.sqrt(2.0))
        assert 1.8 <= err_coarse / err_fine <= 2.2

    def test_field_lp_matches_lp_norm_for_components(self, dom, g128):
        v = generate_test_field(dom, g128, "none", seed=0)
        direct = field_lp(v, 2)
        assert np.isfinite(direct) and direct > 0.0


class TestExactness:
    def test_affine_fields_differentiate_exactly(self, g256):
        X = g256.points()
        m = g256.member
        const = GridField(g256, np.broadcast_to(np.array([2.0, -3.0]), g256.shape + (2,)).copy(), {})
        assert np.abs(gradient(const)[m]).max() == 0.0
        ident = GridField(g256, X.copy(), {})
        assert np.abs(gradient(ident)[m] - np.eye(2)).max() == 0.0
        assert np.abs(divergence(ident)[m] - 2.0).max() == 0.0
        assert np.abs(curl(ident)[m]).max() == 0.0
        rot = GridField(g256, np.stack([-X[..., 1], X[..., 0]], axis=-1), {})
        assert np.abs(divergence(rot)[m]).max() == 0.0
        assert np.abs(curl(rot)[m] - 2.0).max() == 0.0

    def test_gradient_fields_are_curl_free(self, g256):
        X = g256.points()
        gp = np.stack(
            [
                3.0 * X[..., 0] - 0.7 * X[..., 1] + 1.0,
                -0.7 * X[..., 0] + 0.4 * X[..., 1] - 2.0,
            ],
            axis=-1,
        )
        assert np.abs(curl(GridField(g256, gp, {}))[g256.member]).max() <= 1e-12


class TestConvergence:
    def _grad_errs(self, dom, mask_name):
        errs = []
        for h in (1 / 64, 1 / 128):
            g = build_grid(dom, h)
            X = g.points()
            vals = np.stack([np.sin(X[..., 1]), np.zeros(g.shape)], axis=-1)
            gr = gradient(GridField(g, vals, {}))
            exact = np.zeros(g.shape + (2, 2))
            exact[..., 0, 1] = np.cos(X[..., 1])
            m = g.member if mask_name == "member" else g.interior
            errs.append(float(np.abs((gr - exact)[m]).max()))
        return errs

    def test_second_order_at_interior_nodes(self, dom):
        errs = self._grad_errs(dom, "interior")
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_first_order_at_shell_nodes(self, dom):
        errs = self._grad_errs(dom, "member")
        assert 1.8 <= errs[0] / errs[1] <= 2.2


class TestBoundaryAdaptedFields:
    def test_fields_vanish_on_the_shell(self, dom, g128):
        for bc in ("normal_zero", "tangential_zero"):
            v = generate_test_field(dom, g128, bc, seed=4)
            assert np.abs(v.values[g128.shell]).max() == 0.0

    def test_mean_divergence_vanishes_for_normal_zero(self, dom, g128):
        for seed in (0, 3, 11):
            v = generate_test_field(dom, g128, "normal_zero", seed=seed)
            integ = float(divergence(v)[g128.member].sum()) * g128.cell_measure()
            assert abs(integ) <= 1e-12

    def test_determinism_and_meta(self, dom, g128):
        a = generate_test_field(dom, g128, "normal_zero", seed=5)
        b = generate_test_field(dom, g128, "normal_zero", seed=5)
        assert np.array_equal(a.values, b.values)
        assert a.meta["bc"] == "normal_zero"
        assert a.meta["seed"] == 5
        assert a.meta["ramp"] > 0

    def test_distinct_seeds_differ(self, dom, g128):
        a = generate_test_field(dom, g128, "normal_zero", seed=5)
        b = generate_test_field(dom, g128, "normal_zero", seed=6)
        assert not np.array_equal(a.values, b.values)

    def test_collar_width_validation(self, dom):
        g = build_grid(dom, 1 / 32)
        with pytest.raises(ValueError, match="collar width must be at least 2 h"):
            generate_test_field(dom, g, "normal_zero", seed=0, collar_width=0.05)

    def test_ramp_validation(self, dom, g128):
        with pytest.raises(ValueError, match="ramp must be positive"):
            generate_test_field(dom, g128, "normal_zero", seed=0, ramp=-1.0)


class TestGreenResidual:
    def test_zero_field_gives_zero(self, dom, g128):
        z = GridField(g128, np.zeros(g128.shape + (2,)), {})
        assert green_residual(z, np.ones(g128.shape)) == 0.0

    def test_summation_by_parts_is_exact_for_collar_fields(self, dom):
        # compactly supported fields telescope exactly; only roundoff remains
        for h in (1 / 64, 1 / 128):
            g = build_grid(dom, h)
            u = generate_test_field(dom, g, "normal_zero", seed=2)
            X = g.points()
            vsm = np.sin(1.3 * X[..., 0]) * np.cos(0.7 * X[..., 1])
            assert abs(green_residual(u, vsm)) <= 1e-10


class TestGridStructure:
    def test_interior_plus_shell_is_member(self, g128):
        assert np.array_equal(g128.interior | g128.shell, g128.member)
        assert not (g128.interior & g128.shell).any()

    def test_no_isolated_nodes(self, g128):
        assert isolated_nodes(g128).sum() == 0


class TestFieldIO:
    def test_roundtrip_is_exact(self, dom, g128, tmp_path):
        v = generate_test_field(dom, g128, "normal_zero", seed=9)
        prefix = tmp_path / "f"
        save_field(v, prefix)
        back = load_field(prefix, dom)
        assert np.array_equal(back.values, v.values)
        assert back.grid.h == v.grid.h
        assert back.meta["seed"] == 9

    def test_payload_dims_checked(self, dom, g128, tmp_path):
        v = generate_test_field(dom, g128, "normal_zero", seed=9)
        prefix = tmp_path / "f"
        save_field(v, prefix)
        raw = (tmp_path / "f.bin").read_bytes()
        (tmp_path / "f.bin").write_bytes(raw[:-16])
        with pytest.raises(ValueError, match="field payload does not match sidecar dims"):
            load_field(prefix, dom)

    def test_dimension_mismatch_rejected(self, dom, g128, tmp_path):
        v = generate_test_field(dom, g128, "normal_zero", seed=9)
        prefix = tmp_path / "f"
        save_field(v, prefix)
        with pytest.raises(ValueError, match="field dimension does not match the domain"):
            load_field(prefix, gallery("unit_cube"))
