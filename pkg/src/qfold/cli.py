"""Pipeline orchestration and command line.

Six subcommands, each runnable on its own given the artifacts of the
stages before it, all rooted at an output directory:

    gen-data          -> dataset.jsonl
    train-encoder     -> stage1_checkpoint.json, stage1_trace.csv
    compress          -> compact_archive.jsonl
    train-classifier  -> classifier_checkpoint.json, classifier_trace.csv
    evaluate          -> eval_report.json
    report            -> shot_report.json

Every stage updates manifest.json with its configuration, seeds, and
artifact names; nothing nondeterministic (no timestamps) goes in, so two
runs from the same manifest produce byte-identical artifacts.

Exit codes: 0 success, 2 bad configuration or usage, 3 stage failure
(the failing stage is named on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import (
    BlockDiagonalAnsatz,
    LayeredAnsatz,
    apply_ansatz,
    load_checkpoint,
    save_checkpoint,
)
from .bas import enumerate_bas, load_dataset, sample_dataset, save_dataset, split_train_test
from .classifier import (
    ClassifierConfig,
    evaluate_classifier,
    train_classifier,
    write_classifier_trace_csv,
)
from .compressor import compress, load_archive, save_archive, split_subsystems
from .encoder import Stage1Config, train_stage1, write_trace_csv
from .errors import ConfigError, QfoldError
from .simcore import QubitPartition, partial_trace, purity
from .swaptest import ShotBudget, estimate_purity

MANIFEST_NAME = "manifest.json"
CSV_SCHEMAS = {
    "stage1_trace": "v1:iteration,cost,residual,residual_norm,grad_l1,cum_delta_theta_l1",
    "classifier_trace": "v1:iteration,cost,grad_l1,cum_delta_theta_l1",
}

STAGE_ORDER = [
    "gen-data",
    "train-encoder",
    "compress",
    "train-classifier",
    "evaluate",
    "report",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one end-to-end run needs; all randomness is seeded here."""

    side: int = 8
    samples: int | None = None  # None: the full enumeration
    seed: int = 0
    out_dir: str = "run"
    run_id: str = "default"
    stage1: Stage1Config = Stage1Config(depth=3)
    classifier_depth: int = 3
    classifier_lr: float = 0.001
    classifier_iters: int = 100
    classifier_seed: int = 0
    readout_qubit: int | None = None
    ansatz_mode: str = "generic"
    train_count: int | None = None
    split_seed: int = 0
    split_tolerance: float = 0.02
    shots: int | None = None
    shot_seed: int = 0
    shot_estimates: int = 16

    def __post_init__(self):
        if self.ansatz_mode not in ("generic", "block-diagonal"):
            raise ConfigError(f"unknown ansatz mode {self.ansatz_mode!r}")
        n = 2 * int(math.log2(self.side)) if self.side >= 2 else 0
        if self.side < 2 or self.side & (self.side - 1) or n % 2:
            raise ConfigError(f"grid side must be a power of two >= 2, got {self.side}")


def default_depth(side: int) -> int:
    return 5 if side >= 16 else 3


def resolve_train_count(total: int, requested: int | None) -> int:
    """The 400/108 protocol split for the full 8x8 set, else 80/20."""
    if requested is not None:
        return requested
    if total == 508:
        return 400
    return max(1, min(total - 1, round(0.8 * total)))


# ---------------------------------------------------------------------------
# Manifest plumbing
# ---------------------------------------------------------------------------


def _manifest_path(out_dir) -> Path:
    return Path(out_dir) / MANIFEST_NAME


def load_manifest(out_dir) -> dict:
    path = _manifest_path(out_dir)
    if not path.exists():
        return {"version": __version__, "csv_schemas": CSV_SCHEMAS, "stages": {}}
    with open(path) as fh:
        return json.load(fh)


def _write_manifest(out_dir, manifest: dict):
    with open(_manifest_path(out_dir), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _record_stage(out_dir, stage: str, config: dict, artifacts: dict, run_id=None):
    manifest = load_manifest(out_dir)
    manifest["version"] = __version__
    manifest["csv_schemas"] = CSV_SCHEMAS
    if run_id is not None:
        manifest["run_id"] = run_id
    manifest["stages"][stage] = {
        "status": "ok",
        "config": config,
        "artifacts": artifacts,
    }
    _write_manifest(out_dir, manifest)


def _record_failure(out_dir, stage: str, error: Exception):
    manifest = load_manifest(out_dir)
    manifest["stages"][stage] = {"status": "failed", "error": str(error)}
    _write_manifest(out_dir, manifest)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_gen_data(out_dir, side: int, samples: int | None, seed: int, run_id=None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if samples is None:
        dataset = enumerate_bas(side)
    else:
        dataset = sample_dataset(side, samples, seed)
    path = out / "dataset.jsonl"
    save_dataset(dataset, path)
    bars = sum(1 for s in dataset if s.label == 1)
    _record_stage(
        out_dir,
        "gen-data",
        {"side": side, "samples": samples, "seed": seed},
        {
            "dataset": path.name,
            "count": len(dataset),
            "bars": bars,
            "stripes": len(dataset) - bars,
        },
        run_id=run_id,
    )
    return path


def stage_train_encoder(out_dir, config: Stage1Config) -> Path:
    out = Path(out_dir)
    dataset = load_dataset(out / "dataset.jsonl")
    params, trace = train_stage1(dataset, config)
    n = dataset[0].state.n_qubits
    ckpt = out / "stage1_checkpoint.json"
    save_checkpoint(ckpt, LayeredAnsatz(n, config.depth), params)
    trace_path = out / "stage1_trace.csv"
    write_trace_csv(trace, trace_path)
    final = trace.records[-1]
    _record_stage(
        out_dir,
        "train-encoder",
        {
            "depth": config.depth,
            "learning_rate": config.learning_rate,
            "max_iters": config.max_iters,
            "convergence_tol": config.convergence_tol,
            "init_scale": config.init_scale,
            "batch_size": config.batch_size,
            "batch_seed": config.batch_seed,
            "seed": config.seed,
        },
        {
            "checkpoint": ckpt.name,
            "trace": trace_path.name,
            "iterations": len(trace),
            "final_cost": final.cost,
            "final_residual": final.residual,
            "converged": final.residual < config.convergence_tol,
        },
    )
    return ckpt


def stage_compress(out_dir, tolerance: float = 0.02) -> Path:
    out = Path(out_dir)
    dataset = load_dataset(out / "dataset.jsonl")
    ansatz, params = load_checkpoint(out / "stage1_checkpoint.json")
    partition = QubitPartition.equal_halves(ansatz.n_qubits)
    records = []
    for sample in dataset:
        state = apply_ansatz(ansatz, params, sample.state)
        cert = split_subsystems(state, partition, tolerance=tolerance)
        records.append((compress(cert), sample.label))
    path = out / "compact_archive.jsonl"
    save_archive(records, path, stage1_checkpoint="stage1_checkpoint.json")
    probs = [c.postselect_prob for c, _ in records]
    _record_stage(
        out_dir,
        "compress",
        {"tolerance": tolerance},
        {
            "archive": path.name,
            "count": len(records),
            "compact_qubits": records[0][0].n_qubits if records else None,
            "postselect_prob_mean": float(np.mean(probs)) if probs else None,
            "postselect_prob_min": float(np.min(probs)) if probs else None,
        },
    )
    return path


def _build_classifier_config(
    n_qubits: int,
    depth: int,
    mode: str,
    learning_rate: float,
    max_iters: int,
    readout_qubit: int | None,
    seed: int,
) -> ClassifierConfig:
    if mode == "block-diagonal":
        block = LayeredAnsatz(n_qubits - 1, depth)
        ansatz = BlockDiagonalAnsatz(0, block, block)
    else:
        ansatz = LayeredAnsatz(n_qubits, depth)
    return ClassifierConfig(
        ansatz=ansatz,
        learning_rate=learning_rate,
        max_iters=max_iters,
        readout_qubit=readout_qubit,
        seed=seed,
    )


def _split_archive(out_dir, train_count: int | None, split_seed: int):
    out = Path(out_dir)
    dataset = load_dataset(out / "dataset.jsonl")
    records, _ = load_archive(out / "compact_archive.jsonl")
    if len(records) != len(dataset):
        raise ConfigError(
            f"archive has {len(records)} entries for {len(dataset)} dataset samples"
        )
    count = resolve_train_count(len(dataset), train_count)
    train_samples, test_samples = split_train_test(dataset, count, split_seed)
    keys = {id(s) for s in train_samples}
    pairs = [(compact.state, label) for compact, label in records]
    train = [pairs[i] for i, s in enumerate(dataset) if id(s) in keys]
    test = [pairs[i] for i, s in enumerate(dataset) if id(s) not in keys]
    return train, test, count


def stage_train_classifier(
    out_dir,
    depth: int = 3,
    learning_rate: float = 0.001,
    max_iters: int = 100,
    seed: int = 0,
    readout_qubit: int | None = None,
    ansatz_mode: str = "generic",
    train_count: int | None = None,
    split_seed: int = 0,
) -> Path:
    out = Path(out_dir)
    train, _, count = _split_archive(out_dir, train_count, split_seed)
    n = train[0][0].n_qubits
    config = _build_classifier_config(
        n, depth, ansatz_mode, learning_rate, max_iters, readout_qubit, seed
    )
    params, trace = train_classifier(train, config)
    ckpt = out / "classifier_checkpoint.json"
    save_checkpoint(ckpt, config.ansatz, params)
    trace_path = out / "classifier_trace.csv"
    write_classifier_trace_csv(trace, trace_path)
    _record_stage(
        out_dir,
        "train-classifier",
        {
            "depth": depth,
            "learning_rate": learning_rate,
            "max_iters": max_iters,
            "seed": seed,
            "readout_qubit": config.readout,
            "ansatz_mode": ansatz_mode,
            "train_count": count,
            "split_seed": split_seed,
        },
        {
            "checkpoint": ckpt.name,
            "trace": trace_path.name,
            "final_cost": trace.records[-1].cost,
        },
    )
    return ckpt


def stage_evaluate(out_dir) -> Path:
    out = Path(out_dir)
    manifest = load_manifest(out_dir)
    cls_stage = manifest["stages"].get("train-classifier")
    if cls_stage is None or cls_stage.get("status") != "ok":
        raise ConfigError("evaluate needs a completed train-classifier stage")
    cfg = cls_stage["config"]
    train, test, _ = _split_archive(out_dir, cfg["train_count"], cfg["split_seed"])
    ansatz, params = load_checkpoint(out / "classifier_checkpoint.json")
    config = ClassifierConfig(
        ansatz=ansatz,
        learning_rate=cfg["learning_rate"],
        max_iters=cfg["max_iters"],
        readout_qubit=cfg["readout_qubit"],
        seed=cfg["seed"],
    )
    report = evaluate_classifier(test, params, config, train_samples=train)
    payload = {
        "accuracy": report.accuracy,
        "per_class": report.per_class,
        "confusion": report.confusion,
        "train_accuracy": report.train_accuracy,
        "test_size": len(test),
        "train_size": len(train),
    }
    path = out / "eval_report.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _record_stage(out_dir, "evaluate", {}, {"report": path.name, "accuracy": report.accuracy})
    return path


def stage_report(
    out_dir, shots: int | None = None, shot_seed: int = 0, estimates: int = 16
) -> Path:
    """Collect the cost counters a sampling backend would have paid.

    The circuit-evaluation figure per training iteration is
    N * (2 * n * d + 1): one baseline cost circuit per sample plus two
    angle-shift evaluations for each of the n*d parameters.
    """
    out = Path(out_dir)
    manifest = load_manifest(out_dir)
    report: dict = {"stages_seen": sorted(manifest["stages"])}

    enc = manifest["stages"].get("train-encoder")
    gen = manifest["stages"].get("gen-data")
    if enc and enc["status"] == "ok" and gen and gen["status"] == "ok":
        n_samples = gen["artifacts"]["count"]
        side = gen["config"]["side"]
        n_qubits = 2 * int(math.log2(side))
        depth = enc["config"]["depth"]
        iters = enc["artifacts"]["iterations"]
        per_iter = n_samples * (2 * n_qubits * depth + 1)
        report["stage1"] = {
            "samples": n_samples,
            "qubits": n_qubits,
            "depth": depth,
            "iterations": iters,
            "cost_circuits_per_iteration_parameter_shift": per_iter,
            "cost_circuits_total_parameter_shift": per_iter * iters,
        }
    else:
        report["stage1"] = {"missing": "train-encoder artifacts"}

    archive_path = out / "compact_archive.jsonl"
    if archive_path.exists():
        records, _ = load_archive(archive_path)
        probs = [c.postselect_prob for c, _ in records]
        report["postselection"] = {
            "samples": len(probs),
            "probabilities_recorded": len(probs) == len(records),
            "mean_probability": float(np.mean(probs)),
            "min_probability": float(np.min(probs)),
        }
    else:
        report["postselection"] = {"missing": "compact archive"}

    if shots is not None:
        ckpt = out / "stage1_checkpoint.json"
        if not ckpt.exists():
            raise ConfigError("swap-test validation needs a stage1 checkpoint")
        ansatz, params = load_checkpoint(ckpt)
        dataset = load_dataset(out / "dataset.jsonl")
        partition = QubitPartition.equal_halves(ansatz.n_qubits)
        k = min(estimates, len(dataset))
        deviations = []
        total_shots = 0
        for i in range(k):
            state = apply_ansatz(ansatz, params, dataset[i].state)
            exact = purity(partial_trace(state, partition, keep="A"))
            res = estimate_purity(state, partition, "A", ShotBudget(shots, shot_seed + i))
            deviations.append(abs(res.raw_mean - exact))
            total_shots += res.shots_used
        report["swap_test"] = {
            "shots_per_estimate": shots,
            "estimates": k,
            "total_shots": total_shots,
            "mean_abs_deviation": float(np.mean(deviations)),
            "seed": shot_seed,
        }

    path = out / "shot_report.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _record_stage(
        out_dir,
        "report",
        {"shots": shots, "shot_seed": shot_seed, "estimates": estimates},
        {"report": path.name},
    )
    return path


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage in order; a stage failure is recorded and stops the run."""
    out_dir = config.out_dir
    stages = [
        (
            "gen-data",
            lambda: stage_gen_data(
                out_dir, config.side, config.samples, config.seed, run_id=config.run_id
            ),
        ),
        ("train-encoder", lambda: stage_train_encoder(out_dir, config.stage1)),
        ("compress", lambda: stage_compress(out_dir, config.split_tolerance)),
        (
            "train-classifier",
            lambda: stage_train_classifier(
                out_dir,
                depth=config.classifier_depth,
                learning_rate=config.classifier_lr,
                max_iters=config.classifier_iters,
                seed=config.classifier_seed,
                readout_qubit=config.readout_qubit,
                ansatz_mode=config.ansatz_mode,
                train_count=config.train_count,
                split_seed=config.split_seed,
            ),
        ),
        ("evaluate", lambda: stage_evaluate(out_dir)),
        (
            "report",
            lambda: stage_report(
                out_dir,
                shots=config.shots,
                shot_seed=config.shot_seed,
                estimates=config.shot_estimates,
            ),
        ),
    ]
    for name, runner in stages:
        try:
            runner()
        except Exception as exc:  # recorded, downstream skipped
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            _record_failure(out_dir, name, exc)
            raise StageFailure(name, exc) from exc
    return load_manifest(out_dir)


class StageFailure(QfoldError):
    def __init__(self, stage: str, error: Exception):
        super().__init__(f"stage {stage} failed: {error}")
        self.stage = stage
        self.error = error


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfold",
        description="Two-stage qubit folding: factor, fold, classify.",
    )
    parser.add_argument("--version", action="version", version=f"qfold {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="enumerate or sample a bars-and-stripes dataset")
    p.add_argument("--side", type=int, default=8, help="grid side, a power of two")
    p.add_argument("--samples", type=int, default=None, help="draw this many (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run")
    p.add_argument("--run-id", default="default")

    p = sub.add_parser("train-encoder", help="train the factoring circuit")
    p.add_argument("--depth", type=int, default=None, help="layers (default: 3, or 5 for side 16)")
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-3, help="stop when 2 - cost drops below")
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--batch-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="run")

    p = sub.add_parser("compress", help="fold every sample through the trained circuit")
    p.add_argument("--tol", type=float, default=0.02, help="per-sample purity residual gate")
    p.add_argument("--out", default="run")

    p = sub.add_parser("train-classifier", help="train the label circuit on folded states")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--readout", type=int, default=None, help="Z readout qubit")
    p.add_argument(
        "--ansatz-mode", choices=["generic", "block-diagonal"], default="generic"
    )
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", default="run")

    p = sub.add_parser("evaluate", help="score the trained classifier on held-out samples")
    p.add_argument("--out", default="run")

    p = sub.add_parser("report", help="summarize shot budgets and post-selection costs")
    p.add_argument("--shots", type=int, default=None, help="run swap-test validation")
    p.add_argument("--shot-seed", type=int, default=0)
    p.add_argument("--estimates", type=int, default=16)
    p.add_argument("--out", default="run")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-data":
            path = stage_gen_data(args.out, args.side, args.samples, args.seed, args.run_id)
            print(f"wrote {path}")
        elif args.command == "train-encoder":
            side = _side_from_manifest(args.out)
            depth = args.depth if args.depth is not None else default_depth(side)
            config = Stage1Config(
                depth=depth,
                learning_rate=args.lr,
                max_iters=args.iters,
                convergence_tol=args.tol,
                init_scale=args.init_scale,
                batch_size=args.batch_size,
                batch_seed=args.batch_seed,
                seed=args.seed,
            )
            path = stage_train_encoder(args.out, config)
            manifest = load_manifest(args.out)
            arts = manifest["stages"]["train-encoder"]["artifacts"]
            print(
                f"wrote {path}; iterations={arts['iterations']} "
                f"residual={arts['final_residual']:.6f} converged={arts['converged']}"
            )
        elif args.command == "compress":
            path = stage_compress(args.out, args.tol)
            print(f"wrote {path}")
        elif args.command == "train-classifier":
            path = stage_train_classifier(
                args.out,
                depth=args.depth,
                learning_rate=args.lr,
                max_iters=args.iters,
                seed=args.seed,
                readout_qubit=args.readout,
                ansatz_mode=args.ansatz_mode,
                train_count=args.train_count,
                split_seed=args.split_seed,
            )
            print(f"wrote {path}")
        elif args.command == "evaluate":
            path = stage_evaluate(args.out)
            with open(path) as fh:
                payload = json.load(fh)
            print(
                f"wrote {path}; accuracy={payload['accuracy']:.4f} "
                f"train_accuracy={payload['train_accuracy']:.4f}"
            )
        elif args.command == "report":
            path = stage_report(args.out, args.shots, args.shot_seed, args.estimates)
            print(f"wrote {path}")
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: missing artifact {exc.filename}", file=sys.stderr)
        return 2
    except StageFailure as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except QfoldError as exc:
        print(f"stage {args.command} failed: {exc}", file=sys.stderr)
        return 3
    return 0


def _side_from_manifest(out_dir) -> int:
    manifest = load_manifest(out_dir)
    gen = manifest["stages"].get("gen-data")
    if gen is None or gen.get("status") != "ok":
        raise ConfigError("train-encoder needs a completed gen-data stage")
    return gen["config"]["side"]


if __name__ == "__main__":
    sys.exit(main())
