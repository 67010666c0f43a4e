import json
import time

import pytest

from qfold.cli import (
    PipelineConfig,
    StageFailure,
    load_manifest,
    main,
    resolve_train_count,
    run_pipeline,
    stage_gen_data,
)
from qfold.compressor import load_archive
from qfold.encoder import Stage1Config


def tiny_config(out_dir, **overrides):
    base = dict(
        side=2,
        out_dir=str(out_dir),
        run_id="test",
        stage1=Stage1Config(depth=3, learning_rate=0.1, max_iters=200),
        classifier_lr=0.02,
        shots=200,
        shot_estimates=4,
    )
    base.update(overrides)
    return PipelineConfig(**base)


def test_smallest_grid_pipeline_fast_and_complete(tmp_path):
    start = time.monotonic()
    manifest = run_pipeline(tiny_config(tmp_path / "run"))
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    stages = manifest["stages"]
    assert all(stages[name]["status"] == "ok" for name in stages)
    assert stages["gen-data"]["artifacts"]["count"] == 4
    assert stages["compress"]["artifacts"]["compact_qubits"] == 2
    assert manifest["run_id"] == "test"


def test_rerun_is_bit_identical(tmp_path):
    run_pipeline(tiny_config(tmp_path / "a"))
    run_pipeline(tiny_config(tmp_path / "b"))
    for name in (
        "manifest.json",
        "dataset.jsonl",
        "stage1_trace.csv",
        "stage1_checkpoint.json",
        "compact_archive.jsonl",
        "classifier_trace.csv",
        "classifier_checkpoint.json",
        "eval_report.json",
        "shot_report.json",
    ):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_records_every_seed(tmp_path):
    manifest = run_pipeline(tiny_config(tmp_path / "run"))
    stages = manifest["stages"]
    assert stages["gen-data"]["config"]["seed"] == 0
    enc = stages["train-encoder"]["config"]
    assert {"seed", "batch_seed", "init_scale"} <= set(enc)
    cls = stages["train-classifier"]["config"]
    assert {"seed", "split_seed"} <= set(cls)
    assert stages["report"]["config"]["shot_seed"] == 0


def test_stage_failure_recorded_and_downstream_skipped(tmp_path):
    out = tmp_path / "run"
    # an impossible convergence demand makes compress reject every sample
    config = tiny_config(out, split_tolerance=1e-12)
    with pytest.raises(StageFailure) as err:
        run_pipeline(config)
    assert err.value.stage == "compress"
    manifest = load_manifest(out)
    assert manifest["stages"]["compress"]["status"] == "failed"
    assert "train-classifier" not in manifest["stages"]


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "run")
    assert main(["gen-data", "--side", "2", "--out", out]) == 0
    # bad config: side not a power of two
    assert main(["gen-data", "--side", "5", "--out", out]) == 2
    # missing upstream artifacts
    assert main(["train-encoder", "--out", str(tmp_path / "empty")]) == 2
    capsys.readouterr()
    # stage failure: compress cannot meet an impossible tolerance
    assert main(["train-encoder", "--iters", "2", "--out", out]) == 0
    code = main(["compress", "--tol", "1e-12", "--out", out])
    err = capsys.readouterr().err
    assert code == 3
    assert "compress" in err


def test_cli_full_run_via_main(tmp_path, capsys):
    out = str(tmp_path / "run")
    for argv in (
        ["gen-data", "--side", "2", "--out", out],
        ["train-encoder", "--lr", "0.1", "--iters", "200", "--out", out],
        ["compress", "--out", out],
        ["train-classifier", "--lr", "0.02", "--out", out],
        ["evaluate", "--out", out],
        ["report", "--shots", "100", "--estimates", "2", "--out", out],
    ):
        assert main(argv) == 0, argv
    capsys.readouterr()
    report = json.loads((tmp_path / "run" / "shot_report.json").read_text())
    # side 2: n = 2 qubits, depth 3, 4 samples -> 4 * (2*2*3 + 1) = 52
    assert report["stage1"]["cost_circuits_per_iteration_parameter_shift"] == 52
    assert report["swap_test"]["total_shots"] == 2 * 100
    assert report["postselection"]["probabilities_recorded"] is True


def test_archive_has_postselection_column(tmp_path):
    manifest = run_pipeline(tiny_config(tmp_path / "run"))
    records, ckpt = load_archive(tmp_path / "run" / "compact_archive.jsonl")
    assert ckpt == "stage1_checkpoint.json"
    assert len(records) == manifest["stages"]["gen-data"]["artifacts"]["count"]
    assert all(c.postselect_prob > 0 for c, _ in records)


def test_resolve_train_count():
    assert resolve_train_count(508, None) == 400
    assert resolve_train_count(508, 300) == 300
    assert resolve_train_count(10, None) == 8
    assert resolve_train_count(4, None) == 3


def test_gen_data_sampled_subset(tmp_path):
    path = stage_gen_data(tmp_path, side=4, samples=10, seed=3)
    lines = [l for l in path.read_text().splitlines() if l.strip()]
    assert len(lines) == 10