import json

import pytest
from click.testing import CliRunner

from ibsync.cli import main
from ibsync.recording import Recording


@pytest.fixture()
def runner():
    return CliRunner()


class TestSynthCommand:
    def test_writes_recording_with_default_trial(self, runner, tmp_path):
        out = tmp_path / "rec"
        result = runner.invoke(main, ["synth", "--out", str(out), "--duration", "5",
                                      "--coupling", "0.6", "--seed", "3"])
        assert result.exit_code == 0, result.output
        recording = Recording(out)
        trials = recording.trials()
        assert len(trials) == 1
        assert trials[0].condition == "No Feedback"
        assert sum(1 for _ in recording.stream_frames(0)) == 5 * 256

    def test_explicit_trials_and_artifacts(self, runner, tmp_path):
        out = tmp_path / "rec"
        result = runner.invoke(main, [
            "synth", "--out", str(out), "--duration", "12", "--seed", "1",
            "--artifact", "4:2:A",
            "--trial", "Non-sync:0:5", "--trial", "Visual:6:6",
        ])
        assert result.exit_code == 0, result.output
        trials = Recording(out).trials()
        assert [t.condition for t in trials] == ["Non-sync", "Visual"]

    def test_bad_artifact_spec_fails(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--out", str(tmp_path / "x"), "--artifact", "oops"])
        assert result.exit_code != 0


class TestRunCommand:
    def test_batch_synth_run_reports_updates(self, runner):
        result = runner.invoke(main, ["run", "--synth", "--batch", "--duration", "9",
                                      "--coupling", "0.8", "--seed", "2"])
        assert result.exit_code == 0, result.output
        assert "published 5 updates" in result.output
        assert "compute latency" in result.output

    def test_batch_replay_run(self, runner, tmp_path):
        out = tmp_path / "rec"
        runner.invoke(main, ["synth", "--out", str(out), "--duration", "6", "--seed", "4"])
        result = runner.invoke(main, ["run", "--replay", str(out), "--batch"])
        assert result.exit_code == 0, result.output
        assert "published 3 updates" in result.output

    def test_run_records_session(self, runner, tmp_path):
        record_dir = tmp_path / "recorded"
        result = runner.invoke(main, ["run", "--synth", "--batch", "--duration", "6",
                                      "--seed", "5", "--record", str(record_dir),
                                      "--open-trial"])
        assert result.exit_code == 0, result.output
        recording = Recording(record_dir)
        assert len(recording.trials()) == 1
        assert sum(1 for _ in recording.stream_frames(0)) == 6 * 256

    def test_requires_exactly_one_source(self, runner, tmp_path):
        assert runner.invoke(main, ["run", "--batch"]).exit_code != 0
        runner.invoke(main, ["synth", "--out", str(tmp_path / "rec"), "--duration", "4"])
        assert runner.invoke(
            main, ["run", "--synth", "--replay", str(tmp_path / "rec"), "--batch"]
        ).exit_code != 0

    def test_live_synth_run_with_speed(self, runner):
        result = runner.invoke(main, ["run", "--synth", "--duration", "4.5",
                                      "--coupling", "0.5", "--seed", "6", "--speed", "16"])
        assert result.exit_code == 0, result.output
        assert "published 2 updates" in result.output


class TestAnalyzeCommand:
    def test_analyze_writes_reports(self, runner, tmp_path):
        out = tmp_path / "rec"
        runner.invoke(main, ["synth", "--out", str(out), "--duration", "12",
                             "--coupling", "0.8", "--seed", "7"])
        report_dir = tmp_path / "report"
        result = runner.invoke(main, ["analyze", str(out), "--out", str(report_dir)])
        assert result.exit_code == 0, result.output
        data = json.loads((report_dir / "report.json").read_text())
        assert data["trials"][0]["trial_valid"] is True
        assert (report_dir / "report.csv").exists()
        assert "trial 1 [No Feedback] ok" in result.output

    def test_analyze_causal_and_per_band(self, runner, tmp_path):
        out = tmp_path / "rec"
        runner.invoke(main, ["synth", "--out", str(out), "--duration", "10", "--seed", "8"])
        result = runner.invoke(main, ["analyze", str(out), "--causal", "--per-band",
                                      "--out", str(tmp_path / "r2")])
        assert result.exit_code == 0, result.output
        data = json.loads((tmp_path / "r2" / "report.json").read_text())
        assert data["parameters"]["filter_mode"] == "causal"
        assert "band_pooled" in data["trials"][0]


class TestBenchCommand:
    def test_bench_json_meets_budget(self, runner):
        result = runner.invoke(main, ["bench", "--updates", "40", "--json"])
        assert result.exit_code == 0, result.output
        stats = json.loads(result.output)
        assert stats["total"]["count"] == 40
        assert stats["total"]["p95"] <= 60.0

    def test_bench_table_output(self, runner):
        result = runner.invoke(main, ["bench", "--updates", "10"])
        assert result.exit_code == 0
        assert "stage" in result.output and "total" in result.output
