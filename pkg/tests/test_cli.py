"""Command-line pipeline: stages, exit codes, overrides, reproducibility."""

import json
import os
import subprocess
import sys

import pytest
import yaml

from dotn.cli import main

BASE_CONFIG = {
    "seed": 0,
    "corpus": {
        "utterance_seconds": 0.3,
        "source_utterances": 2,
        "source_eval_utterances": 1,
        "target_train_utterances": 2,
        "eval_utterances_per_cell": 1,
        "snr_grid_db": [-3.0, 3.0],
    },
    "model": {"hidden": [16], "critic_hidden": [8]},
    "pretrain": {"total_iterations": 30, "batch_size": 16, "f_learning_rate": 1e-3},
    "adapt": {"total_iterations": 10, "batch_size": 16},
}


def write_config(tmp_path, name="config.yaml", **overrides):
    raw = json.loads(json.dumps(BASE_CONFIG))  # deep copy
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key].update(value)
        else:
            raw[key] = value
    raw.setdefault("out_dir", str(tmp_path / "run"))
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    """One completed end-to-end run shared by the read-only tests."""
    tmp_path = tmp_path_factory.mktemp("cli")
    cfg = write_config(tmp_path)
    assert main(["all", "--config", str(cfg)]) == 0
    return tmp_path, cfg


class TestPipeline:
    def test_all_writes_every_artifact(self, finished_run):
        tmp_path, _ = finished_run
        run = tmp_path / "run"
        for rel in (
            "config_resolved.json",
            "corpus/manifest.json",
            "source_only.npz",
            "source_only.log.jsonl",
            "dotn_f.npz",
            "dotn_h.npz",
            "dotn.ckpt.npz",
            "dotn.log.jsonl",
            "eval_noisy.json",
            "eval_noisy.csv",
            "eval_source_only.json",
            "eval_dotn.json",
            "tables/table_amplitude-modulated-burst.csv",
            "plots/plot_mse_vs_snr.tsv",
            "plots/plot_mse_complexity.tsv",
        ):
            assert (run / rel).exists(), rel

    def test_rerun_reproduces_reports_byte_for_byte(self, finished_run, tmp_path):
        first_root, _ = finished_run
        cfg = write_config(tmp_path)  # same seed, fresh directory
        assert main(["all", "--config", str(cfg)]) == 0
        for name in ("eval_noisy.json", "eval_source_only.json", "eval_dotn.json"):
            a = (first_root / "run" / name).read_bytes()
            b = (tmp_path / "run" / name).read_bytes()
            assert a == b, name

    def test_stagewise_run_matches_all(self, finished_run, tmp_path, capsys):
        first_root, _ = finished_run
        cfg = write_config(tmp_path)
        for command in ("gen", "train", "eval", "report"):
            assert main([command, "--config", str(cfg)]) == 0
        capsys.readouterr()
        a = (first_root / "run" / "eval_dotn.json").read_bytes()
        b = (tmp_path / "run" / "eval_dotn.json").read_bytes()
        assert a == b

    def test_seed_override_changes_results(self, finished_run, tmp_path):
        first_root, _ = finished_run
        cfg = write_config(tmp_path)
        assert main(["all", "--config", str(cfg), "--seed", "9"]) == 0
        a = (first_root / "run" / "eval_dotn.json").read_bytes()
        b = (tmp_path / "run" / "eval_dotn.json").read_bytes()
        assert a != b

    def test_out_override_redirects_artifacts(self, tmp_path):
        cfg = write_config(tmp_path)
        other = tmp_path / "elsewhere"
        assert main(["gen", "--config", str(cfg), "--out", str(other)]) == 0
        assert (other / "corpus" / "manifest.json").exists()

    def test_gen_is_idempotent(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["gen", "--config", str(cfg)]) == 0
        manifest = tmp_path / "run" / "corpus" / "manifest.json"
        before = manifest.read_bytes()
        assert main(["gen", "--config", str(cfg)]) == 0
        assert manifest.read_bytes() == before

    def test_console_script_is_wired(self, tmp_path):
        cfg = write_config(tmp_path)
        proc = subprocess.run(
            [sys.executable, "-m", "dotn.cli", "gen", "--config", str(cfg)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr


class TestErrors:
    def test_missing_config_file_is_io_error(self, tmp_path, capsys):
        code = main(["gen", "--config", str(tmp_path / "absent.yaml")])
        assert code == 4
        assert capsys.readouterr().err.startswith("error[io]:")

    def test_unparseable_yaml_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("corpus: [unclosed\n")
        code = main(["gen", "--config", str(path)])
        assert code == 2
        assert capsys.readouterr().err.startswith("error[config]:")

    def test_unknown_key_reports_dotted_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path, corpus={"utterance_minutes": 1})
        code = main(["gen", "--config", str(cfg)])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error[config]:")
        assert "corpus.utterance_minutes" in err

    def test_overlapping_families_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, corpus={"target_families": ["pink"]})
        code = main(["gen", "--config", str(cfg)])
        assert code == 2
        assert "error[config]:" in capsys.readouterr().err

    def test_eval_before_train_is_state_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["eval", "--config", str(cfg)])
        assert code == 3
        assert capsys.readouterr().err.startswith("error[data]:")

    def test_report_before_eval_is_state_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["report", "--config", str(cfg)])
        assert code == 3
        assert capsys.readouterr().err.startswith("error[data]:")

    def test_resume_refuses_foreign_artifacts(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["all", "--config", str(cfg)]) == 0
        changed = write_config(tmp_path, name="changed.yaml",
                               adapt={"total_iterations": 11})
        code = main(["all", "--config", str(changed), "--resume"])
        assert code == 3
        assert capsys.readouterr().err.startswith("error[data]:")

    def test_cached_corpus_with_other_config_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["gen", "--config", str(cfg)]) == 0
        changed = write_config(tmp_path, name="changed.yaml",
                               corpus={"snr_grid_db": [0.0]})
        code = main(["gen", "--config", str(changed)])
        assert code == 2
        assert capsys.readouterr().err.startswith("error[config]:")


class TestResume:
    def test_resume_skips_finished_training(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["all", "--config", str(cfg)]) == 0
        net_path = tmp_path / "run" / "dotn_f.npz"
        stamp = os.path.getmtime(net_path)
        assert main(["train", "--config", str(cfg), "--resume"]) == 0
        assert os.path.getmtime(net_path) == stamp  # untouched, not retrained