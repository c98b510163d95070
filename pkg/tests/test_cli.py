"""End-to-end pipeline tests driven through the command-line interface."""

import json

import pytest
from click.testing import CliRunner

from quanvnet.cli import main
from quanvnet.metrics import SUMMARY_CSV_HEADER

EPOCHS = 2


def run_cli(args):
    result = CliRunner().invoke(main, [str(a) for a in args])
    if result.exception is not None and result.exit_code != 0 and not isinstance(
        result.exception, SystemExit
    ):
        raise result.exception
    return result


@pytest.fixture(scope="module")
def pipeline(small_dataset, tmp_path_factory):
    """One full prepare -> quanv -> train -> eval -> report chain."""
    work = tmp_path_factory.mktemp("cli_chain")
    manifest = work / "manifest.csv"
    cache_dir = work / "features"
    result = run_cli(["prepare", "--root", small_dataset, "--out-manifest", manifest,
                      "--seed", 7])
    assert result.exit_code == 0, result.output
    result = run_cli(["quanv", "--manifest", manifest, "--cache-dir", cache_dir,
                      "--layers", 2, "--seed", 7])
    assert result.exit_code == 0, result.output
    models = {}
    reports = {}
    for kind, source in (("classical", manifest), ("quanv", cache_dir)):
        model_path = work / f"{kind}.tsqm"
        result = run_cli(["train", "--input", source, "--model", kind,
                          "--batch-size", 8, "--epochs", EPOCHS, "--seed", 7,
                          "--out", model_path])
        assert result.exit_code == 0, result.output
        report_path = work / f"{kind}.report.json"
        result = run_cli(["eval", "--model-file", model_path, "--input", source,
                          "--split", "test", "--out-report", report_path])
        assert result.exit_code == 0, result.output
        models[kind] = model_path
        reports[kind] = report_path
    table = work / "table.csv"
    result = run_cli(["report", reports["classical"], reports["quanv"],
                      "--out", table])
    assert result.exit_code == 0, result.output
    return {"work": work, "manifest": manifest, "cache_dir": cache_dir,
            "models": models, "reports": reports, "table": table,
            "dataset": small_dataset}


class TestPrepare:
    def test_manifest_contents(self, pipeline):
        lines = pipeline["manifest"].read_text().splitlines()
        assert lines[0].startswith("# seed=7 n_classes=4 config=")
        assert lines[1] == "path,class_id,split"
        rows = [line.split(",") for line in lines[2:]]
        assert len(rows) == 4 * 14  # undersized images are filtered out
        assert {row[2] for row in rows} == {"train", "val", "test"}

    def test_deterministic_bytes(self, pipeline, tmp_path):
        again = tmp_path / "again.csv"
        result = run_cli(["prepare", "--root", pipeline["dataset"],
                          "--out-manifest", again, "--seed", 7])
        assert result.exit_code == 0
        assert again.read_bytes() == pipeline["manifest"].read_bytes()

    def test_all_filtered_is_an_error(self, pipeline, tmp_path):
        result = run_cli(["prepare", "--root", pipeline["dataset"],
                          "--out-manifest", tmp_path / "m.csv",
                          "--min-size", 4096])
        assert result.exit_code != 0

    def test_max_samples_subsamples(self, pipeline, tmp_path):
        out = tmp_path / "sub.csv"
        result = run_cli(["prepare", "--root", pipeline["dataset"],
                          "--out-manifest", out, "--seed", 7,
                          "--max-samples", 40])
        assert result.exit_code == 0
        assert len(out.read_text().splitlines()) == 2 + 40


class TestQuanv:
    def test_three_split_caches(self, pipeline):
        for split in ("train", "val", "test"):
            assert (pipeline["cache_dir"] / f"{split}.qnvf").exists()

    def test_rerun_reports_up_to_date(self, pipeline):
        before = (pipeline["cache_dir"] / "train.qnvf").read_bytes()
        result = run_cli(["quanv", "--manifest", pipeline["manifest"],
                          "--cache-dir", pipeline["cache_dir"],
                          "--layers", 2, "--seed", 7])
        assert result.exit_code == 0
        assert "up to date" in result.stderr
        assert (pipeline["cache_dir"] / "train.qnvf").read_bytes() == before

    def test_zero_layers_runs_cosine_check(self, pipeline, tmp_path):
        result = run_cli(["quanv", "--manifest", pipeline["manifest"],
                          "--cache-dir", tmp_path / "flat", "--layers", 0,
                          "--seed", 7])
        assert result.exit_code == 0
        assert "cos-identity spot check passed" in result.stderr


class TestTrain:
    def test_artifacts_written(self, pipeline):
        for kind, model in pipeline["models"].items():
            assert model.exists()
            history = model.with_suffix(".history.csv")
            lines = history.read_text().splitlines()
            assert lines[0].startswith("# config=")
            assert lines[1] == "epoch,train_loss,train_acc,val_loss,val_acc"
            assert len(lines) == 2 + EPOCHS

    def test_deterministic_model_bytes(self, pipeline, tmp_path):
        out = tmp_path / "redo.tsqm"
        result = run_cli(["train", "--input", pipeline["manifest"],
                          "--model", "classical", "--batch-size", 8,
                          "--epochs", EPOCHS, "--seed", 7, "--out", out])
        assert result.exit_code == 0
        assert out.read_bytes() == pipeline["models"]["classical"].read_bytes()

    def test_wrong_input_kind_fails(self, pipeline, tmp_path):
        result = run_cli(["train", "--input", pipeline["manifest"],
                          "--model", "quanv", "--epochs", 1,
                          "--out", tmp_path / "x.tsqm"])
        assert result.exit_code != 0

    def test_config_file_supplies_defaults(self, pipeline, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("epochs = 1\nbatch-size = 4  # quick run\n")
        out = tmp_path / "cfg.tsqm"
        result = run_cli(["train", "--input", pipeline["manifest"],
                          "--model", "classical", "--seed", 7, "--out", out,
                          "--config", config])
        assert result.exit_code == 0, result.output
        history = out.with_suffix(".history.csv").read_text().splitlines()
        assert len(history) == 2 + 1  # comment + header + one epoch

    def test_flag_overrides_config_file(self, pipeline, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("epochs = 5\n")
        out = tmp_path / "cfg2.tsqm"
        result = run_cli(["train", "--input", pipeline["manifest"],
                          "--model", "classical", "--seed", 7, "--out", out,
                          "--epochs", 1, "--config", config])
        assert result.exit_code == 0
        history = out.with_suffix(".history.csv").read_text().splitlines()
        assert len(history) == 2 + 1


class TestEval:
    def test_report_fields(self, pipeline):
        for kind, path in pipeline["reports"].items():
            payload = json.loads(path.read_text())
            assert payload["model"] == kind
            assert payload["batch_size"] == 8
            assert payload["n_classes"] == 4
            assert 0.0 <= payload["accuracy"] <= 1.0
            assert "dataset_hash" in payload
            csv_lines = path.with_suffix(".csv").read_text().splitlines()
            assert csv_lines[0] == SUMMARY_CSV_HEADER
            assert len(csv_lines[1].split(",")) == 6

    def test_same_dataset_hash_across_models(self, pipeline):
        hashes = {json.loads(p.read_text())["dataset_hash"]
                  for p in pipeline["reports"].values()}
        assert len(hashes) == 1

    def test_mismatched_input_shape_fails(self, pipeline, tmp_path):
        result = run_cli(["eval", "--model-file", pipeline["models"]["classical"],
                          "--input", pipeline["cache_dir"],
                          "--out-report", tmp_path / "bad.json"])
        assert result.exit_code != 0


class TestReport:
    def test_table_layout(self, pipeline):
        lines = pipeline["table"].read_text().splitlines()
        assert lines[0].startswith("# dataset=")
        header = lines[1].split(",")
        assert header[0] == "batch_size"
        assert "cnn_accuracy" in header and "qnn_accuracy" in header
        assert "cnn_fbeta" in header and "qnn_fbeta" in header
        assert len(lines) == 3
        assert lines[2].split(",")[0] == "8"

    def test_single_report_renders_dash(self, pipeline, tmp_path):
        out = tmp_path / "single.csv"
        result = run_cli(["report", pipeline["reports"]["classical"], "--out", out])
        assert result.exit_code == 0
        assert "-" in out.read_text().splitlines()[2].split(",")

    def test_duplicate_model_batch_rejected(self, pipeline, tmp_path):
        result = run_cli(["report", pipeline["reports"]["classical"],
                          pipeline["reports"]["classical"],
                          "--out", tmp_path / "dup.csv"])
        assert result.exit_code != 0

    def test_different_split_hashes_refused(self, pipeline, tmp_path):
        val_report = tmp_path / "val.json"
        result = run_cli(["eval", "--model-file", pipeline["models"]["quanv"],
                          "--input", pipeline["cache_dir"], "--split", "val",
                          "--out-report", val_report])
        assert result.exit_code == 0
        result = run_cli(["report", pipeline["reports"]["classical"], val_report,
                          "--out", tmp_path / "mix.csv"])
        assert result.exit_code != 0


class TestLocking:
    def test_existing_lock_blocks_write(self, pipeline, tmp_path):
        out = tmp_path / "locked.csv"
        (tmp_path / "locked.csv.lock").write_text("")
        result = run_cli(["prepare", "--root", pipeline["dataset"],
                          "--out-manifest", out, "--seed", 7])
        assert result.exit_code != 0
        assert not out.exists()
