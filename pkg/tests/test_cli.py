import json

import pytest

from mfnas.cli import EXIT_CONFIG, EXIT_OK, main
from mfnas.config import RunConfig, config_to_text, parse_config_file
from mfnas.variation import ConfigurationError

TINY = [
    "--pop-size", "4", "--gen-budget", "4", "--mf", "2", "--complete-epochs", "5",
    "--node-range", "2,4", "--node-cap", "8", "--seed", "1",
]

RUN_ARTIFACTS = ["run_config.txt", "events.jsonl", "budget.json",
                 "final_population.jsonl", "front.csv"]


class TestValidateConfig:
    def test_defaults_ok(self, capsys):
        assert main(["validate-config"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "pop_size = 20" in out
        assert "mf = 6" in out

    def test_mf_above_gen_budget_exits_2(self, capsys):
        assert main(["validate-config", "--mf", "30"]) == EXIT_CONFIG
        assert "tick interval" in capsys.readouterr().err

    def test_odd_pop_size_exits_2(self):
        assert main(["validate-config", "--pop-size", "7"]) == EXIT_CONFIG

    def test_mf_above_complete_epochs_exits_2(self):
        assert main(["validate-config", "--mf", "6", "--complete-epochs", "5"]) == EXIT_CONFIG

    def test_config_file_roundtrip(self, tmp_path):
        cfg = RunConfig(pop_size=8, mf=3, gen_budget=9, seed=5)
        path = tmp_path / "run.cfg"
        path.write_text(config_to_text(cfg))
        back = parse_config_file(path)
        assert back.pop_size == 8 and back.mf == 3 and back.seed == 5

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bogus = 1\n")
        with pytest.raises(ConfigurationError):
            parse_config_file(path)


class TestSearchCommand:
    def test_run_directory_contents(self, tmp_path):
        out = tmp_path / "run"
        assert main(["search", *TINY, "--out-dir", str(out)]) == EXIT_OK
        for name in RUN_ARTIFACTS:
            assert (out / name).exists(), name
        assert (out / "pareto.png").exists()
        assert (out / "hv.png").exists()
        events = [json.loads(l) for l in (out / "events.jsonl").read_text().splitlines()]
        assert len(events) == 4
        assert all("archive_ids" in e for e in events)
        budget = json.loads((out / "budget.json").read_text())
        assert budget["total_simulated_epochs"] == events[-1]["epochs_total"]

    def test_same_seed_identical_event_logs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["search", *TINY, "--no-figures", "--out-dir", str(a)])
        main(["search", *TINY, "--no-figures", "--out-dir", str(b)])
        assert (a / "events.jsonl").read_bytes() == (b / "events.jsonl").read_bytes()

    def test_invalid_config_exit_2(self, tmp_path):
        assert main(["search", "--mf", "99", "--out-dir", str(tmp_path)]) == EXIT_CONFIG

    def test_evaluator_failure_exit_3(self, tmp_path):
        from mfnas.cli import EXIT_EVALUATOR

        code = main(["search", *TINY, "--no-figures", "--out-dir", str(tmp_path),
                     "--evaluator", "exec:/nonexistent-trainer-binary"])
        assert code == EXIT_EVALUATOR


class TestBaselineCommand:
    def test_archive_absent_and_budget_closed_form(self, tmp_path):
        out = tmp_path / "base"
        assert main(["baseline", *TINY, "--no-figures", "--out-dir", str(out)]) == EXIT_OK
        events = [json.loads(l) for l in (out / "events.jsonl").read_text().splitlines()]
        assert all("archive_ids" not in e for e in events)
        budget = json.loads((out / "budget.json").read_text())
        # pop * complete * (gen + 1), minus any re-encountered genotypes
        closed_form = 4 * 5 * (4 + 1)
        assert budget["total_simulated_epochs"] <= closed_form
        assert budget["total_simulated_epochs"] >= 0.8 * closed_form

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["baseline", *TINY, "--no-figures", "--out-dir", str(a)])
        main(["baseline", *TINY, "--no-figures", "--out-dir", str(b)])
        assert (a / "events.jsonl").read_bytes() == (b / "events.jsonl").read_bytes()


class TestStudyCommands:
    def test_rank_study_table(self, tmp_path, capsys):
        out = tmp_path / "study"
        assert main(["rank-study", "--n", "20", "--epochs", "5", "--seed", "0",
                     "--no-figures", "--out", str(out)]) == EXIT_OK
        lines = (out / "tau.csv").read_text().splitlines()
        assert lines[0] == "epoch,tau_vs_final"
        assert len(lines) == 6
        meta = json.loads((out / "tau_meta.json").read_text())
        assert meta["evaluator"] == "synthetic"

    def test_fidelity_sweep_table(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(["fidelity-sweep", *TINY, "--mf-values", "1,2", "--seeds", "0",
                     "--no-figures", "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "mf,cost_reduction,tau,epochs,baseline_epochs"
        assert len(lines) == 3


class TestExportCommand:
    def test_reexport_from_run_dir(self, tmp_path):
        run_dir = tmp_path / "run"
        main(["search", *TINY, "--no-figures", "--out-dir", str(run_dir)])
        export_dir = tmp_path / "exported"
        assert main(["export", "--run", str(run_dir), "--out", str(export_dir)]) == EXIT_OK
        assert (export_dir / "front.csv").read_text() == (run_dir / "front.csv").read_text()

    def test_missing_run_dir(self, tmp_path):
        assert main(["export", "--run", str(tmp_path / "nope")]) == EXIT_CONFIG


class TestRenderDot:
    def test_stdout(self, capsys):
        assert main(["render-dot", "--genome", "NC=[1,0,2] RC=[0,1,5]"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "digraph normal_cell" in out and "Conv 3*3" in out

    def test_to_directory(self, tmp_path):
        assert main(["render-dot", "--genome", "NC=[1,0,2] RC=[0,1,5]",
                     "--out", str(tmp_path)]) == EXIT_OK
        assert len(list(tmp_path.glob("*.dot"))) == 1
