"""CLI surface: subcommands, CSV format, exit codes, determinism."""

import json

import numpy as np
import pytest

from posinv.cli import main

GECO1_RUN = ["integrate", "--model", "builtin:paper-5x5", "--scheme", "geco1",
             "--dt", "1", "--steps", "200"]


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestIntegrate:
    def test_long_run_reaches_steady_state(self, capsys):
        code, out, _ = run(capsys, *GECO1_RUN)
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "step,t,y_1,y_2,y_3,y_4,y_5,inv_defect,err"
        assert len(lines) == 202
        last = lines[-1].split(",")
        assert float(last[-1]) < 1e-10  # error vs the exponential reference
        assert float(last[-2]) <= 1e-12  # invariant defect

    def test_zero_steps_single_row(self, capsys):
        code, out, _ = run(capsys, "integrate", "--model", "builtin:paper-2x2",
                           "--scheme", "heun", "--dt", "0.5", "--steps", "0")
        assert code == 0
        lines = out.strip().split("\n")
        assert len(lines) == 2
        row = lines[1].split(",")
        assert row[0] == "0" and float(row[2]) == 2.0 and float(row[3]) == 1.0

    def test_deterministic_output_files(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["integrate", "--model", "builtin:paper-5x5", "--scheme", "gbbks2",
                "--alpha", "1.0", "--dt", "0.25", "--steps", "40"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert b"\r" not in a.read_bytes()

    def test_invalid_alpha_exits_2(self, capsys):
        code, _, err = run(capsys, "integrate", "--model", "builtin:paper-2x2",
                           "--scheme", "gbbks2", "--alpha", "0.4",
                           "--dt", "1", "--steps", "1")
        assert code == 2
        assert "alpha" in err

    def test_alpha_on_wrong_scheme_exits_2(self, capsys):
        code, _, _ = run(capsys, "integrate", "--model", "builtin:paper-2x2",
                         "--scheme", "geco1", "--alpha", "1.0", "--dt", "1", "--steps", "1")
        assert code == 2

    def test_unknown_model_exits_2(self, capsys):
        code, _, err = run(capsys, "integrate", "--model", "builtin:paper-9x9",
                           "--scheme", "geco1", "--dt", "1", "--steps", "1")
        assert code == 2
        assert "unknown builtin" in err

    def test_unknown_scheme_exits_2(self, capsys):
        code, _, _ = run(capsys, "integrate", "--model", "builtin:paper-2x2",
                         "--scheme", "rk4", "--dt", "1", "--steps", "1")
        assert code == 2

    def test_numerical_blowup_exits_3(self, capsys):
        code, _, err = run(capsys, "integrate", "--model", "builtin:paper-stiff?K=10",
                           "--scheme", "euler", "--dt", "100", "--steps", "400")
        assert code == 3
        assert "failed" in err


class TestStability:
    def test_gbbks1_critical_step(self, capsys):
        code, out, _ = run(capsys, "stability", "--model", "builtin:paper-5x5",
                           "--scheme", "gbbks1")
        assert code == 0
        assert "critical dt: 0.2970862902" in out

    def test_geco1_unconditional_with_certificate(self, capsys):
        code, out, _ = run(capsys, "stability", "--model", "builtin:paper-5x5",
                           "--scheme", "geco1")
        assert code == 0
        assert "critical dt: unconditional" in out
        assert "product=5.941725804" in out
        assert "holds=True" in out

    def test_geco2_verdict_above_critical(self, capsys):
        code, out, _ = run(capsys, "stability", "--model", "builtin:paper-5x5",
                           "--scheme", "geco2", "--dt", "0.3576")
        assert code == 0
        assert "verdict at dt=0.3576: unstable" in out

    def test_random_model_address(self, capsys):
        code, out, _ = run(capsys, "--seed", "3", "stability",
                           "--model", "random:4", "--scheme", "geco1")
        assert code == 0
        assert "critical dt: unconditional" in out
        assert "holds=True" in out

    def test_bad_random_address(self, capsys):
        code, _, _ = run(capsys, "stability", "--model", "random:x", "--scheme", "geco1")
        assert code == 2


class TestReproduce:
    def test_fig2(self, capsys, tmp_path):
        code, out, _ = run(capsys, "reproduce", "fig2", "--outdir", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "fig2_summary.json").read_text())
        assert summary["passed"]
        header = (tmp_path / "fig2.csv").read_text().splitlines()[0]
        assert header.startswith("step,t,y_1")
        assert "[PASS]" in out

    def test_remark8_flags_reported_bracket(self, capsys, tmp_path):
        code, out, _ = run(capsys, "reproduce", "remark8", "--outdir", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "remark8_summary.json").read_text())
        assert summary["passed"]
        assert not summary["agrees_with_reported"]
        assert summary["z_star"] == pytest.approx(-3.92235950274, abs=1e-9)

    def test_jacobians(self, capsys, tmp_path):
        code, _, _ = run(capsys, "reproduce", "jacobians", "--outdir", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "jacobians_summary.json").read_text())
        assert summary["passed"]
        rows = (tmp_path / "jacobians.csv").read_text().splitlines()
        assert len(rows) == 9  # header + 4 schemes x 2 models

    def test_fig6_crossings_reported_honestly(self, capsys, tmp_path):
        """The stiff run reports its computed crossings; the reference-limit
        check passes while the literal 7/70 expectations do not (see note)."""
        code, _, _ = run(capsys, "reproduce", "fig6", "--outdir", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "fig6_summary.json").read_text())
        checks = {c["name"]: c for c in summary["checks"]}
        assert checks["limit_reference_crossing"]["passed"]
        assert summary["crossings"]["K10"] == pytest.approx(1.259, abs=0.01)
        assert summary["crossings"]["K100"] == pytest.approx(6.965, abs=0.01)
        assert "note" in summary

    def test_fig4a_contracts(self, capsys, tmp_path):
        code, _, _ = run(capsys, "reproduce", "fig4a", "--outdir", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "fig4a_summary.json").read_text())
        assert summary["passed"]
        assert summary["dt"] == pytest.approx(0.29708629 * (1 - 1e-3), rel=1e-6)

    def test_unknown_experiment_exits_2(self, capsys):
        code, _, _ = run(capsys, "reproduce", "fig9")
        assert code == 2


class TestOrder:
    def test_second_order_scheme(self, capsys):
        code, out, _ = run(capsys, "order", "--model", "builtin:paper-2x2",
                           "--scheme", "geco2", "--tmax", "1", "--dt0", "0.125",
                           "--levels", "7")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "dt,err,order"
        assert len(lines) == 8
        assert lines[1].endswith(",")  # first row has no order value
        tail_order = float(lines[-1].split(",")[2])
        assert 1.9 <= tail_order <= 2.1

    def test_single_level_has_no_order(self, capsys):
        code, out, _ = run(capsys, "order", "--model", "builtin:paper-2x2",
                           "--scheme", "gbbks1", "--tmax", "0.5", "--dt0", "0.25",
                           "--levels", "1")
        assert code == 0
        lines = out.strip().split("\n")
        assert len(lines) == 2 and lines[1].endswith(",")

    def test_non_dividing_dt_exits_2(self, capsys):
        code, _, _ = run(capsys, "order", "--model", "builtin:paper-2x2",
                         "--scheme", "geco1", "--tmax", "1", "--dt0", "0.3",
                         "--levels", "2")
        assert code == 2
