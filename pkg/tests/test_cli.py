"""Command-line front-end: report files, stdout summaries, exit codes,
and the error-path contract (config errors 1, invariant violations 2)."""

import json
import os
import subprocess
import sys

import pytest

from divcurl.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestDecompose:
    def test_summary_line_and_report(self, tmp_path, capsys):
        code = main(
            ["decompose", "--gallery", "unit_square", "--max-level", "7", "--out", str(tmp_path)]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "decompose unit_square: 768 interior, 1108 complement, 548 small" in out
        doc = read_json(tmp_path / "decompose_unit_square.json")
        assert doc["schema_version"] == "1"
        assert doc["command"] == "decompose"
        assert doc["config"]["max_level"] == 7
        assert doc["violations"] == 0
        assert doc["w3_count"] == 548
        assert (tmp_path / "whitney_interior_unit_square.csv").exists()
        assert (tmp_path / "whitney_complement_unit_square.csv").exists()

    def test_csv_outputs_are_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert (
                main(
                    [
                        "decompose",
                        "--gallery",
                        "unit_square",
                        "--max-level",
                        "7",
                        "--out",
                        str(out),
                    ]
                )
                == EXIT_OK
            )
        for name in ("whitney_interior_unit_square.csv", "whitney_complement_unit_square.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_out_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DIVCURL_OUT", str(tmp_path / "envout"))
        assert main(["decompose", "--gallery", "unit_square", "--max-level", "7"]) == EXIT_OK
        assert (tmp_path / "envout" / "decompose_unit_square.json").exists()


class TestGenfieldExtend:
    def test_generate_then_extend_round_trip(self, tmp_path, capsys):
        prefix = str(tmp_path / "f1")
        code = main(
            [
                "genfield",
                "--gallery",
                "unit_square",
                "--h",
                "0.0078125",
                "--bc",
                "normal-zero",
                "--seed",
                "1",
                "--collar-width",
                "0.023",
                "--prefix",
                prefix,
            ]
        )
        assert code == EXIT_OK
        assert os.path.exists(prefix + ".bin") and os.path.exists(prefix + ".json")

        code = main(
            [
                "extend",
                "--gallery",
                "unit_square",
                "--field",
                prefix,
                "--max-level",
                "7",
                "--out",
                str(tmp_path / "e1"),
            ]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "extend unit_square: corol1=" in out
        doc = read_json(tmp_path / "e1" / "extend_unit_square.json")
        assert doc["schema_version"] == "1"
        g = doc["global"]
        assert g["corol1_ratio"] > 0 and g["corol2_ratio"] > 0
        assert "zero_field" not in g and "violation" not in g
        assert doc["per_cube"]["violations"] == 0
        assert (tmp_path / "e1" / "ev_unit_square.bin").exists()

        code = main(
            [
                "extend",
                "--gallery",
                "unit_square",
                "--field",
                prefix,
                "--max-level",
                "7",
                "--out",
                str(tmp_path / "e2"),
            ]
        )
        assert code == EXIT_OK
        assert (tmp_path / "e1" / "ev_unit_square.bin").read_bytes() == (
            tmp_path / "e2" / "ev_unit_square.bin"
        ).read_bytes()

    def test_missing_field_is_config_error(self, tmp_path, capsys):
        code = main(
            [
                "extend",
                "--gallery",
                "unit_square",
                "--field",
                str(tmp_path / "missing_prefix"),
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "error: field not found:" in err and "missing_prefix.json" in err

    def test_collar_narrower_than_grid_rejected(self, tmp_path, capsys):
        code = main(
            [
                "genfield",
                "--gallery",
                "unit_square",
                "--h",
                "0.03125",
                "--bc",
                "normal-zero",
                "--collar-width",
                "0.05",
                "--prefix",
                str(tmp_path / "bad"),
            ]
        )
        assert code == EXIT_CONFIG
        assert "error: collar width must be at least 2 h" in capsys.readouterr().err


class TestVerify:
    def test_happy_path_prints_every_check(self, tmp_path, capsys):
        code = main(
            ["verify", "--gallery", "unit_square", "--max-level", "7", "--out", str(tmp_path)]
        )
        assert code == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if ": " in l]
        assert len(lines) == 14
        assert all(l.endswith(": pass") for l in lines)
        doc = read_json(tmp_path / "verify_unit_square.json")
        assert doc["passed"] is True

    def test_injected_fault_exits_two(self, tmp_path, capsys):
        code = main(
            [
                "verify",
                "--gallery",
                "unit_square",
                "--max-level",
                "7",
                "--inject-fault",
                "w3",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_INVARIANT
        captured = capsys.readouterr()
        assert "error: invariant violation: (w1), (w3)" in captured.err


class TestEstimate:
    def test_writes_report_and_maximizer(self, tmp_path, capsys):
        code = main(
            [
                "estimate",
                "--gallery",
                "unit_square",
                "--inequality",
                "gaffney",
                "--bc",
                "normal-zero",
                "--h",
                "0.03125",
                "--samples",
                "2",
                "--kmax",
                "1",
                "--ascent-iters",
                "0",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        assert "estimate unit_square gaffney p=2: max_ratio=" in capsys.readouterr().out
        doc = read_json(tmp_path / "estimate_gaffney_unit_square.json")
        assert doc["schema_version"] == "1"
        assert doc["estimate"]["max_ratio"] > 0
        assert os.path.exists(tmp_path / "maximizer_gaffney_unit_square.bin")

    def test_zero_samples_is_config_error(self, tmp_path, capsys):
        code = main(
            [
                "estimate",
                "--gallery",
                "unit_square",
                "--inequality",
                "gaffney",
                "--samples",
                "0",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_CONFIG
        assert "error: samples must be >= 1" in capsys.readouterr().err


class TestStudy:
    def test_single_row_study(self, tmp_path, capsys):
        csv_path = tmp_path / "s.csv"
        code = main(
            [
                "study",
                "--min-level",
                "0",
                "--max-level",
                "0",
                "--p",
                "2",
                "--bc",
                "normal-zero",
                "--samples",
                "1",
                "--kmax",
                "1",
                "--ascent-iters",
                "0",
                "--csv",
                str(csv_path),
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        assert "study: 1 rows ->" in capsys.readouterr().out
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "level,bc,p,max_ratio,basis_size,h,boundary_dim"
        assert len(lines) == 2


class TestProbe:
    def test_probe_report(self, tmp_path, capsys):
        code = main(
            [
                "probe",
                "--gallery",
                "unit_square",
                "--pairs",
                "8",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        assert "probe unit_square: worst_epsilon=" in capsys.readouterr().out
        doc = read_json(tmp_path / "probe_unit_square.json")
        assert doc["probe"]["failing_pairs"] == 0


class TestConfigErrors:
    def test_unknown_gallery_tag(self, tmp_path, capsys):
        code = main(
            ["decompose", "--gallery", "bogus_tag", "--out", str(tmp_path)]
        )
        assert code == EXIT_CONFIG
        assert "unknown gallery tag" in capsys.readouterr().err

    def test_negative_level_rejected(self, tmp_path, capsys):
        code = main(
            [
                "decompose",
                "--gallery",
                "koch_snowflake",
                "--param",
                "level=-1",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_CONFIG
        assert "error: level must be a non-negative integer" in capsys.readouterr().err

    def test_missing_subcommand_and_bad_flag(self, capsys):
        assert main([]) == EXIT_CONFIG
        capsys.readouterr()
        assert main(["decompose", "--no-such-flag"]) == EXIT_CONFIG

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "decompose" in capsys.readouterr().out

    def test_domain_required(self, tmp_path, capsys):
        code = main(["decompose", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG
        assert "error: one of --gallery or --descriptor is required" in capsys.readouterr().err


class TestInstalledEntryPoint:
    def test_subprocess_decompose(self, tmp_path):
        proc = subprocess.run(
            [
                "divcurl",
                "decompose",
                "--gallery",
                "unit_square",
                "--max-level",
                "7",
                "--out",
                str(tmp_path),
            ],
            capture_output=True,
            text=True,
            timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        assert "decompose unit_square: 768 interior, 1108 complement, 548 small" in proc.stdout
