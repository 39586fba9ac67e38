"""Constant-estimation lab: norm ratios, sampling + ascent estimator,
dense p=2 spectral oracle, witness scan, and the Koch level study."""

import csv

import numpy as np
import pytest

from divcurl import lab
from divcurl.domains import gallery
from divcurl.fields import GridField, build_grid, generate_test_field


@pytest.fixture(scope="module")
def square():
    return gallery("unit_square")


@pytest.fixture(scope="module")
def seed5_field(square):
    grid = build_grid(square, 1 / 64)
    return generate_test_field(square, grid, "normal_zero", seed=5)


class TestNormRatios:
    def test_friedrichs_below_gaffney_same_field(self, seed5_field):
        fr = lab.friedrichs_ratio(seed5_field, p=2)
        ga = lab.gaffney_ratio(seed5_field, p=2)
        assert fr == pytest.approx(0.9554011043811974, abs=1e-12)
        assert ga == pytest.approx(0.9933043562279655, abs=1e-12)
        assert fr <= ga

    def test_ratios_are_scale_invariant(self, seed5_field):
        fr = lab.friedrichs_ratio(seed5_field)
        ga = lab.gaffney_ratio(seed5_field)
        v2 = GridField(seed5_field.grid, 3.7 * seed5_field.values, dict(seed5_field.meta))
        assert abs(lab.friedrichs_ratio(v2) - fr) <= 1e-12
        assert abs(lab.gaffney_ratio(v2) - ga) <= 1e-12

    def test_other_exponents(self, seed5_field):
        assert lab.gaffney_ratio(seed5_field, p=1.5) == pytest.approx(
            1.2533469835629452, abs=1e-12
        )
        assert lab.gaffney_ratio(seed5_field, p=np.inf) == pytest.approx(
            0.5777516811345065, abs=1e-12
        )

    def test_constant_field_ratios(self, square):
        grid = build_grid(square, 1 / 32, pad=2 / 32)
        m = grid.member.astype(float)
        vc = GridField(grid, np.stack([m, m], axis=-1), meta={})
        assert lab.friedrichs_ratio(vc, 2) == 1.0
        assert np.isinf(lab.gaffney_ratio(vc, 2))

    def test_generic_collar_field(self, square):
        grid = build_grid(square, 1 / 32, pad=2 / 32)
        vg = generate_test_field(square, grid, "normal_zero", seed=1, collar_width=0.08)
        fr = lab.friedrichs_ratio(vg, 2)
        ga = lab.gaffney_ratio(vg, 2)
        assert fr == pytest.approx(0.938686163955984, abs=1e-12)
        assert ga == pytest.approx(0.9744226085654304, abs=1e-12)
        assert 0 < fr <= ga


class TestEstimator:
    def test_single_sample_no_ascent_is_the_sample_ratio(self, square):
        e1 = lab.estimate_constant(
            square, "gaffney", "normal_zero", p=2, samples=1, seed=4, h=1 / 64, ascent_iters=0
        )
        assert e1.max_ratio == pytest.approx(e1.sample_ratios[0], rel=1e-12)
        assert e1.max_ratio == pytest.approx(1.0007939222474347, abs=1e-12)

    def test_single_sample_p_inf_is_exact(self, square):
        ei = lab.estimate_constant(
            square, "gaffney", "normal_zero", p=np.inf, samples=1, seed=4, h=1 / 64
        )
        assert ei.max_ratio == ei.sample_ratios[0]
        assert ei.max_ratio == pytest.approx(0.5509968017120217, abs=1e-12)

    def test_monotone_in_sample_count(self, square):
        vals = [
            lab.estimate_constant(
                square, "gaffney", "normal_zero", p=2, samples=s, seed=4, h=1 / 64, ascent_iters=0
            ).max_ratio
            for s in (1, 2, 4, 8)
        ]
        frozen = [
            1.0007939222474347,
            1.0007939222474347,
            1.0009634832475283,
            1.0009634832475283,
        ]
        assert vals == pytest.approx(frozen, abs=1e-12)
        assert all(vals[i] <= vals[i + 1] for i in range(3))

    def test_sample_stream_is_a_prefix(self, square):
        e4 = lab.estimate_constant(
            square, "gaffney", "normal_zero", p=2, samples=4, seed=4, h=1 / 64, ascent_iters=0
        )
        e8 = lab.estimate_constant(
            square, "gaffney", "normal_zero", p=2, samples=8, seed=4, h=1 / 64, ascent_iters=0
        )
        assert e8.sample_ratios[:4] == e4.sample_ratios

    def test_to_dict_schema(self, square):
        e = lab.estimate_constant(
            square, "gaffney", "normal_zero", p=np.inf, samples=2, seed=0, h=1 / 32
        )
        d = e.to_dict()
        assert set(d) == {
            "inequality",
            "bc",
            "p",
            "domain",
            "samples",
            "seed",
            "h",
            "collar_width",
            "basis_size",
            "max_ratio",
            "sample_ratios",
            "optimizer_trace",
            "converged",
            "maximizer_coeffs",
        }
        assert d["p"] == "inf"
        assert d["domain"]["tag"] == "unit_square"

    def test_koch_estimate_finite(self):
        k2 = gallery("koch_snowflake", level=2)
        ek = lab.estimate_constant(
            k2, "gaffney", "normal_zero", p=2, samples=4, seed=0, h=1 / 64, ascent_iters=12
        )
        assert ek.max_ratio == pytest.approx(1.0021828668047383, abs=1e-12)
        assert np.isfinite(ek.max_ratio)

    def test_validation_errors(self, square):
        with pytest.raises(ValueError, match="inequality must be friedrichs or gaffney"):
            lab.estimate_constant(square, "poincare", "normal_zero")
        with pytest.raises(ValueError, match="samples must be >= 1"):
            lab.estimate_constant(square, "gaffney", "normal_zero", samples=0)


class TestAscent:
    def test_fixed_point_of_converged_run(self, square):
        grid = build_grid(square, 1 / 32, pad=2 / 32)
        basis = lab.build_lab_basis(square, grid, "normal_zero", kmax=1)
        rng = np.random.default_rng(0)
        r1 = lab.maximize_ratio(basis, "gaffney", 2.0, rng.standard_normal(basis.size), iters=600)
        assert r1["converged"] is True
        assert r1["ratio"] == pytest.approx(1.0036716676118604, abs=1e-12)
        assert len(r1["trace"]) == 53
        tr1 = r1["trace"]
        assert all(tr1[i] <= tr1[i + 1] + 1e-15 for i in range(len(tr1) - 1))
        r2 = lab.maximize_ratio(basis, "gaffney", 2.0, np.asarray(r1["coeffs"]), iters=60)
        tr2 = np.asarray(r2["trace"])
        assert r2["converged"] is True
        assert float(tr2.max() - tr2.min()) == 0.0

    def test_ascent_validation(self, square):
        grid = build_grid(square, 1 / 32, pad=2 / 32)
        basis = lab.build_lab_basis(square, grid, "normal_zero", kmax=1)
        with pytest.raises(ValueError, match=r"ascent needs p in \(1, inf\); use sampling for p = inf"):
            lab.maximize_ratio(basis, "gaffney", np.inf, np.ones(basis.size))
        with pytest.raises(ValueError, match="init must be nonzero"):
            lab.maximize_ratio(basis, "gaffney", 2.0, np.zeros(basis.size))


class TestSpectralOracle:
    def test_dense_oracle_at_coarse_h(self, square):
        orc = lab.spectral_oracle_p2(square, "normal_zero", h=1 / 32)
        assert orc["dense"] is True
        assert orc["free_nodes"] == 729
        assert orc["identity_gap"] == 0.0
        assert orc["gaffney_grad_constant_p2"] == 1.0
        assert orc["mu1"] == pytest.approx(22.376856848582882, abs=1e-9)
        assert orc["max_ratio"] == pytest.approx(1.0221003027065685, abs=1e-12)
        assert orc["max_ratio"] == pytest.approx(np.sqrt(1.0 + 1.0 / orc["mu1"]), abs=1e-12)
        assert orc["eigenfield"].grid.h == 1 / 32

    def test_estimator_tracks_oracle(self, square):
        orc = lab.spectral_oracle_p2(square, "normal_zero", h=1 / 32)
        est = lab.estimate_constant(
            square, "gaffney", "normal_zero", p=2, samples=16, seed=0, h=1 / 32
        )
        assert est.max_ratio == pytest.approx(1.0047345842023985, abs=1e-12)
        gap = abs(est.max_ratio - orc["max_ratio"]) / orc["max_ratio"]
        assert gap <= 0.02

    def test_collar_too_wide_rejected(self, square):
        with pytest.raises(ValueError, match="collar leaves no free nodes; shrink the width"):
            lab.spectral_oracle_p2(square, "normal_zero", h=1 / 16, collar_width=0.7)


class TestWitnessScan:
    def test_thousand_fields_no_counterexample(self, square):
        ws = lab.witness_scan(square, count=1000, seed=0, tol=1e-6)
        assert ws["count"] == 1000
        assert ws["matches"] == 0
        assert ws["violations"] == 0
        assert ws["eps_w"] == 1e-12
        assert ws["tol"] == 1e-6
        assert ws["max_gaffney_ratio_seen"] == pytest.approx(1.0010837647689976, abs=1e-12)


class TestLevelStudy:
    def test_single_cell_study(self, tmp_path):
        out = tmp_path / "study.csv"
        rows = lab.koch_level_study(
            [0], ["normal_zero"], [2], str(out), samples=1, seed=0, kmax=1, ascent_iters=0
        )
        assert len(rows) == 1
        row = rows[0]
        assert row["level"] == 0
        assert row["bc"] == "normal_zero"
        assert row["p"] == 2
        assert row["h"] == 1 / 48
        assert np.isfinite(row["max_ratio"]) and row["max_ratio"] > 0
        assert row["basis_size"] > 0
        assert row["boundary_dim"] == pytest.approx(np.log(4) / np.log(3), abs=1e-12)
        with open(out) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            assert header == ["level", "bc", "p", "max_ratio", "basis_size", "h", "boundary_dim"]
            assert len(list(reader)) == 1
