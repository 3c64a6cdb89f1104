"""CLI behavior: subcommands, outputs, determinism, exit codes."""

import json

import pytest

from whistlesim.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main


def run_cli(args):
    return main(args)


class TestRun:
    def test_writes_outputs(self, tmp_path, capsys):
        code = run_cli([
            "run", "--set", "n_ticks=150", "--set", "scenario=cvr",
            "--set", "group_size=3", "--replicas", "2", "--seed", "7",
            "--out", str(tmp_path),
        ])
        assert code == EXIT_OK
        assert (tmp_path / "metrics.csv").exists()
        assert (tmp_path / "transcript.jsonl").exists()
        assert (tmp_path / "txlog.csv").exists()
        out = capsys.readouterr().out
        assert "verified_count: 1.0000" in out

    def test_deterministic_outputs(self, tmp_path):
        for sub in ("a", "b"):
            run_cli([
                "run", "--set", "n_ticks=150", "--replicas", "3", "--seed", "7",
                "--out", str(tmp_path / sub),
            ])
        assert (tmp_path / "a" / "metrics.csv").read_bytes() == (
            tmp_path / "b" / "metrics.csv"
        ).read_bytes()

    def test_outputs_invariant_to_parallelism(self, tmp_path):
        for sub, jobs in (("j1", "1"), ("j3", "3")):
            run_cli([
                "run", "--set", "n_ticks=150", "--set", "scenario=cnr",
                "--set", "group_size=3", "--replicas", "6", "--seed", "7",
                "--jobs", jobs, "--out", str(tmp_path / sub),
            ])
        for name in ("metrics.csv", "transcript.jsonl", "txlog.csv"):
            assert (tmp_path / "j1" / name).read_bytes() == (
                tmp_path / "j3" / name
            ).read_bytes()

    def test_unknown_key_is_usage_error(self, tmp_path, capsys):
        code = run_cli(["run", "--set", "bogus=1", "--out", str(tmp_path)])
        assert code == EXIT_USAGE
        assert "bogus" in capsys.readouterr().err

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "scenario.cfg"
        cfg.write_text("scenario = cnr\ngroup_size = 3\nn_ticks = 120\nreplicas = 2\n")
        code = run_cli(["run", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_OK

    def test_missing_config_is_io_error(self, tmp_path):
        code = run_cli(["run", "--config", str(tmp_path / "nope.cfg"),
                        "--out", str(tmp_path)])
        assert code == EXIT_IO

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WHISTLESIM_OUT", str(tmp_path / "env_out"))
        code = run_cli(["run", "--set", "n_ticks=60", "--replicas", "1", "--seed", "1"])
        assert code == EXIT_OK
        assert (tmp_path / "env_out" / "metrics.csv").exists()


class TestSweep:
    def test_sweep_output(self, tmp_path, capsys):
        code = run_cli([
            "sweep", "--param", "honesty_deposit", "--grid", "0,2000",
            "--set", "n_ticks=20", "--set", "temperature=0",
            "--replicas", "10", "--seed", "3", "--out", str(tmp_path),
        ])
        assert code == EXIT_OK
        text = (tmp_path / "sweep.csv").read_text()
        assert text.startswith("# schema=sweep-v1")
        assert "honesty_deposit" in capsys.readouterr().out

    def test_empty_grid_usage_error(self, tmp_path):
        code = run_cli(["sweep", "--param", "temperature", "--grid", ",",
                        "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_unsorted_grid_usage_error(self, tmp_path):
        code = run_cli(["sweep", "--param", "temperature", "--grid", "1,0.5",
                        "--out", str(tmp_path)])
        assert code == EXIT_USAGE


class TestAblate:
    def test_four_rows(self, tmp_path, capsys):
        code = run_cli([
            "ablate", "--set", "n_ticks=20", "--replicas", "20", "--seed", "5",
            "--out", str(tmp_path),
        ])
        assert code == EXIT_OK
        lines = (tmp_path / "ablation.csv").read_text().strip().splitlines()
        assert len(lines) == 2 + 4
        out = capsys.readouterr().out
        assert "wo_deposit" in out


class TestAudit:
    @pytest.fixture
    def transcript(self, tmp_path):
        run_cli([
            "run", "--set", "n_ticks=150", "--set", "scenario=cvr",
            "--set", "group_size=3", "--replicas", "1", "--seed", "7",
            "--out", str(tmp_path),
        ])
        return tmp_path / "transcript.jsonl"

    def test_clean_transcript(self, transcript, capsys):
        assert run_cli(["audit", str(transcript)]) == EXIT_OK
        out = capsys.readouterr().out
        for step in ("report_received", "contract_deployed", "deposit_received",
                     "evidence_received", "verified", "enforced"):
            assert step in out

    def test_corrupted_balance_fails(self, transcript, tmp_path):
        lines = transcript.read_text().splitlines()
        for i, line in enumerate(lines):
            rec = json.loads(line)
            if rec.get("kind") == "balances":
                addr = next(iter(rec["accounts"]))
                rec["accounts"][addr] += 1
                lines[i] = json.dumps(rec, sort_keys=True)
        bad = tmp_path / "bad.jsonl"
        bad.write_text("\n".join(lines) + "\n")
        assert run_cli(["audit", str(bad)]) == EXIT_VIOLATION

    def test_corrupt_json_fails(self, tmp_path):
        bad = tmp_path / "garbage.jsonl"
        bad.write_text("{{{\n")
        assert run_cli(["audit", str(bad)]) == EXIT_VIOLATION

    def test_missing_file_is_io_error(self, tmp_path):
        assert run_cli(["audit", str(tmp_path / "none.jsonl")]) == EXIT_IO

    def test_baseline_transcript_no_protocol_events(self, tmp_path, capsys):
        run_cli(["run", "--set", "n_ticks=60", "--replicas", "1", "--seed", "2",
                 "--out", str(tmp_path)])
        assert run_cli(["audit", str(tmp_path / "transcript.jsonl")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "report_received" not in out


class TestUsage:
    def test_bad_subcommand(self):
        assert run_cli(["frobnicate"]) == EXIT_USAGE

    def test_bad_set_syntax(self, tmp_path):
        assert run_cli(["run", "--set", "novalue", "--out", str(tmp_path)]) == EXIT_USAGE
