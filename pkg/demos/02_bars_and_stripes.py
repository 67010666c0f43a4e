"""Bars-and-Stripes datasets and their amplitude encodings.

A side-s grid has 2**s - 2 bars patterns and 2**s - 2 stripes patterns
(the all-dark and all-lit grids belong to both classes and are dropped),
so side 8 gives 508 samples and side 16 gives 131068.
"""

import numpy as np

from qfold.bas import enumerate_bas, sample_dataset, split_train_test

print("== pattern counts ==")
for side in (2, 4, 8):
    print(f"side {side:2d}: {len(enumerate_bas(side))} patterns")
print("side 16: 131068 patterns (sampled below rather than materialized)")

print("\n== one bars and one stripes grid, side 4 ==")
samples = enumerate_bas(4)
bars = samples[4]
stripes = samples[18]
for s in (bars, stripes):
    print(f"kind={s.grid.kind} label={s.label:+d} mask={s.grid.mask:04b}")
    for row in s.grid.pixels:
        print("   ", "".join("#" if p else "." for p in row))

print("\n== amplitude encoding ==")
print(f"side 4 -> {bars.state.n_qubits} qubits; amplitudes of the bars grid above:")
print(np.round(bars.state.amplitudes.real, 4))
print("norm:", np.linalg.norm(bars.state.amplitudes))

print("\n== sampling the 16x16 set ==")
draw = sample_dataset(16, 1000, seed=0)
labels = sum(1 for s in draw if s.label == 1)
print(f"1000 samples drawn without replacement; bars fraction {labels / 1000:.3f}")
print(f"each encodes into {draw[0].state.n_qubits} qubits")

print("\n== stratified split ==")
train, test = split_train_test(enumerate_bas(8), 400, seed=0)
bt = sum(1 for s in train if s.label == 1)
be = sum(1 for s in test if s.label == 1)
print(f"train {len(train)} ({bt} bars), test {len(test)} ({be} bars)")
