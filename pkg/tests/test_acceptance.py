"""End-to-end acceptance checks for the full two-stage pipeline.

Each test prints one PASS/FAIL line (visible under pytest -s or in the
captured output).  The heavyweight artifacts (trained circuits for the
8x8 and 16x16 grids) are built once per session and shared.
"""

import math
import time

import numpy as np
import pytest

from qfold.ansatz import BlockDiagonalAnsatz, LayeredAnsatz, apply_ansatz
from qfold.bas import enumerate_bas, sample_dataset, split_train_test
from qfold.classifier import (
    ClassifierConfig,
    classification_cost,
    classification_shift_gradient,
    evaluate_classifier,
    reweighted_gradient,
    train_classifier,
)
from qfold.cli import PipelineConfig, run_pipeline
from qfold.compressor import compress, decompress, split_subsystems
from qfold.encoder import (
    Stage1Config,
    per_sample_purity_residuals,
    purity_cost,
    purity_shift_gradient,
    train_stage1,
)
from qfold.simcore import (
    QubitPartition,
    StateVector,
    fidelity_pure,
    partial_trace,
    purity,
    tensor,
)
from qfold.swaptest import ShotBudget, destructive_swap_test, estimate_purity


def check(num, name, ok, detail):
    print(f"ACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} {name}: {detail}"


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector.from_amplitudes(amps, normalize=True)


@pytest.fixture(scope="session")
def run8():
    dataset = enumerate_bas(8)
    config = Stage1Config(
        depth=3, learning_rate=0.05, max_iters=500, convergence_tol=1e-3, seed=0
    )
    params, trace = train_stage1(dataset, config)
    return {
        "dataset": dataset,
        "ansatz": LayeredAnsatz(6, 3),
        "params": params,
        "trace": trace,
        "config": config,
    }


@pytest.fixture(scope="session")
def compact8(run8):
    partition = QubitPartition.equal_halves(6)
    pairs = []
    for sample in run8["dataset"]:
        out = apply_ansatz(run8["ansatz"], run8["params"], sample.state)
        pairs.append((compress(split_subsystems(out, partition, tolerance=0.02)), sample.label))
    return pairs


@pytest.fixture(scope="session")
def run16():
    dataset = sample_dataset(16, 1000, seed=0)
    config = Stage1Config(
        depth=5, learning_rate=0.05, max_iters=500, convergence_tol=1e-3, seed=0
    )
    params, trace = train_stage1(dataset, config)
    return {
        "dataset": dataset,
        "ansatz": LayeredAnsatz(8, 5),
        "params": params,
        "trace": trace,
    }


def test_criterion_01_dataset_counts():
    start = time.monotonic()
    n8 = len(enumerate_bas(8))
    n16 = len(enumerate_bas(16))
    elapsed = time.monotonic() - start
    check(
        1,
        "dataset-counts",
        n8 == 508 and n16 == 131068 and elapsed < 5.0,
        f"8x8 -> {n8}, 16x16 -> {n16}, {elapsed:.2f}s",
    )


def test_criterion_02_stage1_convergence_8x8(run8):
    trace = run8["trace"]
    final = trace.records[-1].residual
    check(
        2,
        "stage1-8x8",
        final <= 0.02 and len(trace) <= 500,
        f"residual {final:.5f} after {len(trace)} iterations (depth 3, 508 samples)",
    )


def test_criterion_03_stage1_convergence_16x16(run16):
    trace = run16["trace"]
    final = trace.records[-1].residual
    if final <= 0.05 and len(trace) <= 500:
        check(3, "stage1-16x16", True, f"residual {final:.5f} after {len(trace)} iterations")
        return
    diffs = np.diff(trace.costs())
    monotone = float(np.mean(diffs >= -1e-12))
    check(
        3,
        "stage1-16x16",
        monotone >= 0.90,
        f"residual {final:.5f} (shortfall vs 0.05), monotone {monotone:.1%} of iterations",
    )


def test_criterion_04_compact_shapes(compact8, run16):
    q8 = {compact.n_qubits for compact, _ in compact8}
    residuals = per_sample_purity_residuals(
        run16["params"], run16["dataset"], QubitPartition.equal_halves(8)
    )
    best = int(np.argmin(residuals))
    out = apply_ansatz(run16["ansatz"], run16["params"], run16["dataset"][best].state)
    compact16 = compress(split_subsystems(out, QubitPartition.equal_halves(8), tolerance=0.02))
    check(
        4,
        "compact-shapes",
        q8 == {4} and compact16.n_qubits == 5,
        f"8x8 -> {sorted(q8)} qubits over {len(compact8)} samples, 16x16 -> {compact16.n_qubits}",
    )


def test_criterion_05_roundtrip_losslessness(run8, compact8):
    fids = []
    for (compact, _), sample in zip(compact8, run8["dataset"]):
        rebuilt = decompress(compact, run8["ansatz"], run8["params"])
        fids.append(fidelity_pure(rebuilt, sample.state))
    mean_fid = float(np.mean(fids))
    check(
        5,
        "roundtrip",
        mean_fid >= 0.99,
        f"mean fidelity {mean_fid:.5f}, min {min(fids):.5f} over {len(fids)} samples",
    )


def test_criterion_06_classification(run8, compact8):
    train_set, _ = split_train_test(run8["dataset"], 400, seed=0)
    keys = {id(s) for s in train_set}
    pairs = [(c.state, label) for c, label in compact8]
    train = [pairs[i] for i, s in enumerate(run8["dataset"]) if id(s) in keys]
    test = [pairs[i] for i, s in enumerate(run8["dataset"]) if id(s) not in keys]
    accuracies = []
    saturated = []
    for seed in (0, 1, 2):
        config = ClassifierConfig(
            ansatz=LayeredAnsatz(4, 3), learning_rate=0.001, max_iters=100, seed=seed
        )
        params, trace = train_classifier(train, config)
        report = evaluate_classifier(test, params, config)
        accuracies.append(report.accuracy)
        costs = trace.costs()
        drop = costs[0] - costs[-1]
        tail_range = float(costs[-10:].max() - costs[-10:].min())
        saturated.append(bool(drop > 0 and tail_range <= 0.01 * drop))
        # module invariant: the cost decreases in >= 90% of iterations
        assert np.mean(np.diff(costs) <= 1e-12) >= 0.90
    ok = all(a >= 0.90 for a in accuracies) and all(saturated)
    check(
        6,
        "classification",
        ok,
        f"test accuracy per seed {[f'{a:.3f}' for a in accuracies]} on {len(test)} samples, "
        f"cost saturated within 100 iters: {saturated}",
    )


def test_criterion_07_swap_test_statistics():
    partition = QubitPartition.equal_halves(4)
    hits = 0
    for case in range(100):
        state = random_state(4, 3000 + case)
        exact = purity(partial_trace(state, partition, keep="A"))
        res = estimate_purity(state, partition, "A", ShotBudget(1000, 4000 + case))
        if abs(res.raw_mean - exact) <= 3 * res.standard_error:
            hits += 1
    a = random_state(3, 5000)
    b = random_state(3, 5001)
    stds = {}
    for shots in (100, 1000, 10000):
        vals = [
            destructive_swap_test(a, b, ShotBudget(shots, 6000 + r)).raw_mean
            for r in range(30)
        ]
        stds[shots] = float(np.std(vals, ddof=1))
    r1 = stds[100] / stds[1000]
    r2 = stds[1000] / stds[10000]
    root10 = math.sqrt(10)
    scaling_ok = root10 / 1.5 < r1 < root10 * 1.5 and root10 / 1.5 < r2 < root10 * 1.5
    check(
        7,
        "swap-test",
        hits >= 95 and scaling_ok,
        f"{hits}/100 within 3 standard errors; std ratios {r1:.2f}, {r2:.2f} vs sqrt(10)={root10:.2f}",
    )


def test_criterion_08_gradient_agreement():
    rng = np.random.default_rng(42)
    worst = 0.0

    def fd(cost, params, h=1e-6):
        grad = np.zeros_like(params)
        for k in range(params.size):
            up = params.copy()
            up[k] += h
            down = params.copy()
            down[k] -= h
            grad[k] = (cost(up) - cost(down)) / (2 * h)
        return grad

    for trial in range(20):
        dataset = [random_state(4, 7000 + 10 * trial + j) for j in range(3)]
        params = rng.uniform(-math.pi, math.pi, 8)
        shift = purity_shift_gradient(params, dataset)
        ref = fd(lambda p: purity_cost(p, dataset), params)
        worst = max(worst, np.linalg.norm(shift - ref) / max(np.linalg.norm(ref), 1e-8))
    for trial in range(20):
        samples = [(random_state(3, 8000 + 10 * trial + j), 1 if j % 2 else -1) for j in range(4)]
        config = ClassifierConfig(ansatz=LayeredAnsatz(3, 2), seed=0)
        params = rng.uniform(-math.pi, math.pi, 6)
        shift = classification_shift_gradient(params, samples, config)
        ref = fd(lambda p: classification_cost(p, samples, config), params)
        worst = max(worst, np.linalg.norm(shift - ref) / max(np.linalg.norm(ref), 1e-8))
    check(
        8,
        "gradients",
        worst < 1e-6,
        f"worst relative deviation {worst:.2e} over 20+20 instances of both objectives",
    )


def test_criterion_09_block_diagonal_invariances():
    rng = np.random.default_rng(43)
    block = BlockDiagonalAnsatz(0, LayeredAnsatz(3, 2), LayeredAnsatz(3, 2))
    config = ClassifierConfig(ansatz=block)
    params = rng.uniform(-math.pi, math.pi, block.n_params)

    def build(seed, gamma=0.0, w0=0.5):
        b0 = random_state(3, seed).amplitudes
        b1 = random_state(3, seed + 100).amplitudes
        amps = np.concatenate(
            [math.sqrt(w0) * b0, math.sqrt(1 - w0) * np.exp(1j * gamma) * b1]
        )
        return StateVector.from_amplitudes(amps)

    base = [(build(9000 + i), 1 if i % 2 else -1) for i in range(8)]
    cost0 = classification_cost(params, base, config)
    phase_dev = 0.0
    for gamma in (0.5, 1.3, -2.1):
        phased = [(build(9000 + i, gamma=gamma), lab) for i, (_, lab) in enumerate(base)]
        phase_dev = max(phase_dev, abs(classification_cost(params, phased, config) - cost0))
    ref = reweighted_gradient((build(9500), 1), params, config, (0.5, 0.5))
    grad_dev = 0.0
    for w0, gamma in ((0.2, 0.8), (0.7, -1.1), (0.95, 2.9)):
        sample = (build(9500, gamma=gamma, w0=w0), 1)
        got = reweighted_gradient(sample, params, config, (w0, 1 - w0))
        grad_dev = max(grad_dev, float(np.max(np.abs(got - ref))))
    check(
        9,
        "block-invariances",
        phase_dev <= 1e-12 and grad_dev <= 1e-10,
        f"cost deviation under branch phase {phase_dev:.2e}, "
        f"rebalanced-gradient deviation {grad_dev:.2e}",
    )


def test_criterion_10_determinism(tmp_path):
    def run(out):
        config = PipelineConfig(
            side=2,
            out_dir=str(out),
            run_id="acceptance",
            stage1=Stage1Config(depth=3, learning_rate=0.1, max_iters=200),
            classifier_lr=0.02,
        )
        run_pipeline(config)

    run(tmp_path / "a")
    run(tmp_path / "b")
    names = ["stage1_trace.csv", "classifier_trace.csv", "manifest.json"]
    identical = all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names
    )
    check(10, "determinism", identical, f"byte-compared {names} across two runs")
