"""CLI exit codes and file handling (in-process thin client)."""

import json

import pytest

from teleosim import cli


def run_cli(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:  # argparse-originated exits
        return exc.code


class TestExitCodes:
    def test_success_is_zero(self, tmp_path, capsys):
        log = tmp_path / "run.jsonl"
        rc = run_cli(["run", "--scenario", "trivial", "--variant", "basic", "--log", str(log)])
        assert rc == 0
        assert log.exists()
        assert "success" in capsys.readouterr().out

    def test_timeout_is_two(self, tmp_path, capsys):
        # zero step size: the follower never moves, so the task times out
        cfg = tmp_path / "gains.json"
        cfg.write_text(json.dumps({"gains": {"s": 0.0}}))
        rc = run_cli(
            ["run", "--scenario", "precision-grasp", "--variant", "basic", "--config", str(cfg)]
        )
        assert rc == 2
        assert "timeout" in capsys.readouterr().out

    def test_unknown_scenario_is_three(self, capsys):
        rc = run_cli(["run", "--scenario", "warp", "--variant", "fc"])
        assert rc == 3

    def test_usage_error_is_three(self, capsys):
        rc = run_cli(["run", "--scenario", "place", "--variant", "hyper"])
        assert rc == 3

    def test_bad_config_file_is_three(self, tmp_path, capsys):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{nope")
        rc = run_cli(["run", "--scenario", "trivial", "--variant", "basic", "--config", str(cfg)])
        assert rc == 3

    def test_bad_bind_is_three(self, capsys):
        rc = run_cli(["serve", "--bind", "nocolon"])
        assert rc == 3


class TestReplayAndReport:
    def test_replay_round_trip(self, tmp_path, capsys):
        log = tmp_path / "run.jsonl"
        assert run_cli(["run", "--scenario", "trivial", "--variant", "fg", "--log", str(log)]) == 0
        assert run_cli(["replay", "--log", str(log)]) == 0
        assert "matches" in capsys.readouterr().out

    def test_replay_missing_file_is_three(self, capsys):
        assert run_cli(["replay", "--log", "/nonexistent.jsonl"]) == 3

    def test_report_renders_table(self, tmp_path, capsys):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        run_cli(["run", "--scenario", "trivial", "--variant", "basic", "--log", str(a)])
        run_cli(["run", "--scenario", "trivial", "--variant", "fc", "--log", str(b)])
        csv_path = tmp_path / "summary.csv"
        rc = run_cli(["report", str(a), str(b), "--csv", str(csv_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "basic" in out and "fc" in out
        assert csv_path.read_text().startswith("variant,")
