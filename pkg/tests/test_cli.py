"""CLI workflows end to end (in-process service transport)."""

import json

import pytest
from click.testing import CliRunner

from btt.cli import main


@pytest.fixture
def cli():
    return CliRunner()


def run_cmd(cli, args, **kw):
    result = cli.invoke(main, args, catch_exceptions=False, **kw)
    return result


class TestRun:
    def test_run_writes_traces_and_log(self, cli, tmp_path):
        res = run_cmd(
            cli,
            ["run", "--runner", "toy_mlp", "--policy", "none", "--budget", "trials:5",
             "--seed", "1", "--concurrency", "2", "--out", str(tmp_path)],
        )
        assert res.exit_code == 0, res.output
        exp_dir = tmp_path / "toy_mlp-none-s1"
        assert (exp_dir / "experiment.jsonl").exists()
        assert len(list(exp_dir.glob("*.trace.jsonl"))) == 5
        assert "trials" in res.output

    def test_identical_outputs_same_seed(self, cli, tmp_path):
        args = lambda out: [
            "run", "--runner", "toy_mlp", "--policy", "bttackler", "--budget", "trials:4",
            "--seed", "7", "--concurrency", "2", "--out", str(out),
        ]
        run_cmd(cli, args(tmp_path / "a"))
        run_cmd(cli, args(tmp_path / "b"))
        dir_a = tmp_path / "a" / "toy_mlp-bttackler-s7"
        dir_b = tmp_path / "b" / "toy_mlp-bttackler-s7"
        for name in sorted(p.name for p in dir_a.iterdir()):
            assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes(), name

    def test_bad_budget_fails(self, cli, tmp_path):
        res = cli.invoke(main, ["run", "--budget", "bogus:2", "--out", str(tmp_path)])
        assert res.exit_code != 0

    def test_bad_config_file_fails(self, cli, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"agv_bound_typo": 3}')
        res = cli.invoke(
            main,
            ["run", "--budget", "trials:1", "--config", str(cfg), "--out", str(tmp_path)],
        )
        assert res.exit_code != 0
        assert "agv_bound_typo" in res.output


class TestDiagnoseReplay:
    @pytest.fixture
    def experiment(self, cli, tmp_path):
        run_cmd(
            cli,
            ["run", "--runner", "toy_mlp", "--policy", "none", "--budget", "trials:4",
             "--seed", "3", "--concurrency", "2", "--out", str(tmp_path)],
        )
        return tmp_path / "toy_mlp-none-s3"

    def test_diagnose_trace(self, cli, experiment):
        trace = sorted(experiment.glob("*.trace.jsonl"))[0]
        res = run_cmd(cli, ["diagnose", str(trace)])
        assert res.exit_code == 0
        assert "epoch" in res.output

    def test_diagnose_bad_file_nonzero(self, cli, tmp_path):
        bad = tmp_path / "x.trace.jsonl"
        bad.write_text('{"kind":"bogus"}\n')
        res = cli.invoke(main, ["diagnose", str(bad)])
        assert res.exit_code != 0
        assert "line 1" in res.output

    def test_replay_directory(self, cli, experiment, tmp_path):
        out = tmp_path / "rep"
        res = run_cmd(cli, ["replay", str(experiment), "--mode", "per_indicator", "--out", str(out)])
        assert res.exit_code == 0
        assert (out / "replay_report.jsonl").exists()
        assert "AGV" in res.output

    def test_replay_empty_dir_ok(self, cli, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        res = run_cmd(cli, ["replay", str(empty), "--out", str(tmp_path / "o")])
        assert res.exit_code == 0

    def test_replay_does_not_mutate_traces(self, cli, experiment, tmp_path):
        before = {p.name: p.read_bytes() for p in experiment.glob("*")}
        run_cmd(cli, ["replay", str(experiment), "--out", str(tmp_path / "o2")])
        after = {p.name: p.read_bytes() for p in experiment.glob("*")}
        assert before == after

    def test_calibrate(self, cli, experiment, tmp_path):
        labels = {f"t{i:04d}": "good" for i in range(4)}
        labels_file = tmp_path / "labels.json"
        labels_file.write_text(json.dumps(labels))
        grid_file = tmp_path / "grid.json"
        grid_file.write_text(json.dumps([{}, {"lar_zero_threshold": 0.5}]))
        res = run_cmd(
            cli,
            ["calibrate", str(experiment), "--labels", str(labels_file),
             "--grid", str(grid_file), "--out", str(tmp_path / "cal")],
        )
        assert res.exit_code == 0
        ranked = json.loads((tmp_path / "cal" / "calibration.json").read_text())
        assert len(ranked) == 2

    def test_compare_self(self, cli, experiment, tmp_path):
        res = run_cmd(
            cli,
            ["compare", str(experiment), str(experiment), "-k", "4", "--out", str(tmp_path / "cmp")],
        )
        assert res.exit_code == 0
        doc = json.loads((tmp_path / "cmp" / "compare.json").read_text())
        assert doc["tsba_enhanced"] == 0.0
        assert (tmp_path / "cmp" / "compare_timeline.csv").exists()


class TestSpaces:
    def test_list(self, cli):
        res = run_cmd(cli, ["spaces", "list"])
        assert res.exit_code == 0
        assert "toy_mlp" in res.output

    def test_show(self, cli):
        res = run_cmd(cli, ["spaces", "show", "toy_mlp"])
        assert res.exit_code == 0
        assert "learning_rate" in res.output
