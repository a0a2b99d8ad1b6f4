"""
Tests for the command-line entry point and its exit codes.
"""

import json

import pytest

from weak_gauge_lab import main as cli
from weak_gauge_lab.core.laboratory import CheckLine, CheckStatus, RunReport
from weak_gauge_lab.utils.config import ScenarioKind
from weak_gauge_lab.utils.exceptions import NumericalBlowup


@pytest.fixture(autouse=True)
def quiet_logging(mocker):
    mocker.patch.object(cli, "setup_logging")
    mocker.patch.object(cli, "update_log_level")


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text("[run]\nkind = delocalized\n", encoding="utf-8")
    return path


def _report(status=CheckStatus.PASS) -> RunReport:
    return RunReport(ScenarioKind.DELOCALIZED, [CheckLine("norm_drift", status, "1e-7")])


class TestParser:
    """Test argument parsing."""

    def test_run_arguments(self, tmp_path):
        args = cli.build_parser().parse_args(
            ["run", "scenario.ini", "--theta-count", "4", "--seed", "2", "--out", str(tmp_path), "--check"]
        )
        assert args.theta_count == 4
        assert args.seed == 2
        assert args.check

    def test_command_is_required(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args([])


class TestExitCodes:
    """Test the mapping of outcomes to exit codes."""

    def test_success(self, scenario, tmp_path, mocker, capsys):
        run = mocker.patch.object(cli, "run_scenario", return_value=_report())
        code = cli.main(["run", str(scenario), "--out", str(tmp_path / "out"), "--seed", "5"])
        assert code == cli.EXIT_OK
        cfg = run.call_args.args[0]
        assert cfg.run.seed == 5
        assert cfg.run.kind is ScenarioKind.DELOCALIZED
        assert "PASS norm_drift: 1e-7" in capsys.readouterr().out

    def test_failed_acceptance_without_check_still_succeeds(self, scenario, tmp_path, mocker):
        mocker.patch.object(cli, "run_scenario", return_value=_report(CheckStatus.FAIL))
        assert cli.main(["run", str(scenario), "--out", str(tmp_path)]) == cli.EXIT_OK

    def test_configuration_error(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[grid]\ndx = 1\n", encoding="utf-8")
        out = tmp_path / "out"
        assert cli.main(["run", str(path), "--out", str(out)]) == cli.EXIT_CONFIG
        record = json.loads((out / "error.json").read_text(encoding="utf-8"))
        assert record["type"] == "ConfigurationError"
        assert record["key_path"] == "grid.dx"
        assert "ConfigurationError" in capsys.readouterr().err

    def test_invalid_override(self, scenario, tmp_path):
        assert cli.main(["run", str(scenario), "--out", str(tmp_path), "--theta-count", "0"]) == cli.EXIT_CONFIG

    def test_numerical_error(self, scenario, tmp_path, mocker):
        mocker.patch.object(cli, "run_scenario", side_effect=NumericalBlowup("amplitudes not finite", step=12))
        assert cli.main(["run", str(scenario), "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL
        record = json.loads((tmp_path / "error.json").read_text(encoding="utf-8"))
        assert record["type"] == "NumericalBlowup"

    def test_unwritable_log_directory(self, scenario, tmp_path, mocker):
        run = mocker.patch.object(cli, "run_scenario")
        cli.setup_logging.side_effect = PermissionError("read-only file system")
        assert cli.main(["run", str(scenario), "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL
        run.assert_not_called()
        record = json.loads((tmp_path / "error.json").read_text(encoding="utf-8"))
        assert record["type"] == "ResultsStoreError"
        assert record["details"] == str(tmp_path / "logs")

    def test_check_failure(self, scenario, tmp_path, mocker):
        mocker.patch.object(cli, "run_scenario", return_value=_report())
        mocker.patch.object(cli, "self_check", return_value=[CheckLine("continuity", CheckStatus.FAIL, "1e-1")])
        assert cli.main(["run", str(scenario), "--out", str(tmp_path), "--check"]) == cli.EXIT_ACCEPTANCE

    def test_check_with_expected_lines_passes(self, scenario, tmp_path, mocker):
        mocker.patch.object(cli, "run_scenario", return_value=_report())
        mocker.patch.object(
            cli, "self_check", return_value=[CheckLine("lhd_theta_spread", CheckStatus.EXPECTED, "gauge dependent")]
        )
        assert cli.main(["run", str(scenario), "--out", str(tmp_path), "--check"]) == cli.EXIT_OK


class TestSelfCheckCommand:
    """Test the self-check subcommand."""

    def test_passing(self, mocker, capsys):
        mocker.patch.object(cli, "self_check", return_value=[CheckLine("continuity", CheckStatus.PASS, "1e-5")])
        assert cli.main(["self-check"]) == cli.EXIT_OK
        assert "PASS continuity" in capsys.readouterr().out

    def test_failing(self, mocker):
        mocker.patch.object(cli, "self_check", return_value=[CheckLine("continuity", CheckStatus.FAIL, "1e-1")])
        assert cli.main(["self-check"]) == cli.EXIT_ACCEPTANCE
