import json

import pytest
from click.testing import CliRunner

from gridshare.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def synth_file(runner, path, households=2, intervals=12, seed=5):
    result = runner.invoke(
        main,
        [
            "synth",
            "-M",
            str(households),
            "-T",
            str(intervals),
            "--seed",
            str(seed),
            "--out",
            str(path),
        ],
    )
    assert result.exit_code == 0, result.output
    return path


SOLVE_FLAGS = ["--soc-grid", "24", "--action-grid", "5", "--seed", "3"]


class TestSynthAndCheck:
    def test_synth_writes_reproducible_file(self, runner, tmp_path):
        p1 = synth_file(runner, tmp_path / "a.yaml")
        p2 = synth_file(runner, tmp_path / "b.yaml")
        assert p1.read_bytes() == p2.read_bytes()

    def test_check_accepts_valid_file(self, runner, tmp_path):
        path = synth_file(runner, tmp_path / "scen.yaml")
        result = runner.invoke(main, ["check", "--scenario", str(path)])
        assert result.exit_code == 0
        assert "ok:" in result.output

    def test_check_lists_every_violation(self, runner, tmp_path):
        path = synth_file(runner, tmp_path / "scen.yaml")
        text = path.read_text()
        text = text.replace("eta_inv: 0.95", "eta_inv: 1.5")
        text = text.replace("p0: 0.01", "p0: -1.0")
        path.write_text(text)
        result = runner.invoke(main, ["check", "--scenario", str(path)])
        assert result.exit_code == 1
        assert "eta_inv" in result.output
        assert "p0" in result.output

    def test_missing_file_is_input_error(self, runner, tmp_path):
        result = runner.invoke(
            main, ["check", "--scenario", str(tmp_path / "nope.yaml")]
        )
        assert result.exit_code == 1


class TestSolveCommand:
    def test_converged_run_exits_zero_and_writes_report(self, runner, tmp_path):
        scen = synth_file(runner, tmp_path / "scen.yaml")
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["solve", "--scenario", str(scen), "--out", str(out)] + SOLVE_FLAGS,
        )
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "result.json").read_text())
        assert doc["game"]["converged"] is True
        assert (out / "traces.csv").exists()
        assert (out / "summary.txt").exists()

    def test_two_solves_are_byte_identical(self, runner, tmp_path):
        scen = synth_file(runner, tmp_path / "scen.yaml")
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                ["solve", "--scenario", str(scen), "--out", str(out)] + SOLVE_FLAGS,
            )
            assert result.exit_code == 0
            outs.append(out)
        assert (outs[0] / "result.json").read_bytes() == (
            outs[1] / "result.json"
        ).read_bytes()
        assert (outs[0] / "traces.csv").read_bytes() == (
            outs[1] / "traces.csv"
        ).read_bytes()

    def test_baseline_only(self, runner, tmp_path):
        scen = synth_file(runner, tmp_path / "scen.yaml")
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["solve", "--scenario", str(scen), "--out", str(out), "--baseline-only"],
        )
        assert result.exit_code == 0
        doc = json.loads((out / "result.json").read_text())
        assert doc["game"] is None

    def test_nonconverged_exits_two_with_complete_report(self, runner, tmp_path):
        scen = synth_file(runner, tmp_path / "scen.yaml", households=3, intervals=8, seed=0)
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["solve", "--scenario", str(scen), "--out", str(out), "--max-sweeps", "1"]
            + SOLVE_FLAGS,
        )
        assert result.exit_code == 2
        doc = json.loads((out / "result.json").read_text())
        assert doc["game"]["converged"] is False
        assert doc["game"]["max_deviation_gain"] > 0.0
        assert (out / "traces.csv").exists()


class TestCertifyCommand:
    def test_certify_passes_on_converged_result(self, runner, tmp_path):
        scen = synth_file(runner, tmp_path / "scen.yaml")
        out = tmp_path / "out"
        assert (
            runner.invoke(
                main,
                ["solve", "--scenario", str(scen), "--out", str(out)] + SOLVE_FLAGS,
            ).exit_code
            == 0
        )
        result = runner.invoke(
            main,
            [
                "certify",
                "--scenario",
                str(scen),
                "--result",
                str(out / "result.json"),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "certified" in result.output

    def test_certify_fails_with_tight_epsilon(self, runner, tmp_path):
        scen = synth_file(runner, tmp_path / "scen.yaml", households=3, intervals=8, seed=0)
        out = tmp_path / "out"
        runner.invoke(
            main,
            ["solve", "--scenario", str(scen), "--out", str(out), "--max-sweeps", "1"]
            + SOLVE_FLAGS,
        )
        result = runner.invoke(
            main,
            [
                "certify",
                "--scenario",
                str(scen),
                "--result",
                str(out / "result.json"),
            ],
        )
        assert result.exit_code == 2
        assert "FAIL" in result.output

    def test_certify_rejects_mismatched_scenario(self, runner, tmp_path):
        scen = synth_file(runner, tmp_path / "scen.yaml")
        other = synth_file(runner, tmp_path / "other.yaml", seed=6)
        out = tmp_path / "out"
        runner.invoke(
            main,
            ["solve", "--scenario", str(scen), "--out", str(out)] + SOLVE_FLAGS,
        )
        result = runner.invoke(
            main,
            [
                "certify",
                "--scenario",
                str(other),
                "--result",
                str(out / "result.json"),
            ],
        )
        assert result.exit_code == 1
        assert "digest" in result.output
