"""Tour of the statevector engine: gates, reductions, measurement.

Conventions used everywhere in qfold: qubit 0 is the most significant
bit of a basis index, and subsystem A of a bipartition sits on the
low-indexed qubits.
"""

import numpy as np

from qfold import (
    QubitPartition,
    StateVector,
    apply_cnot,
    apply_cswap,
    apply_ry,
    fidelity_pure,
    measure_subsystem,
    partial_trace,
    purity,
    tensor,
    von_neumann_entropy,
)

print("== single-qubit rotation ==")
state = StateVector.zero(1)
rotated = apply_ry(state, 0, np.pi / 2)
print("Ry(pi/2)|0> amplitudes:", np.round(rotated.amplitudes.real, 4))

print("\n== entangling and reducing ==")
bell = apply_cnot(apply_ry(StateVector.zero(2), 0, np.pi / 2), 0, 1)
print("Bell-like state:", np.round(bell.amplitudes.real, 4))
partition = QubitPartition((0,), (1,))
rho = partial_trace(bell, partition, keep="A")
print("reduced state of qubit 0:\n", np.round(rho.entries.real, 4))
print(f"purity  Tr(rho^2) = {purity(rho):.4f}   (1/2 means maximally mixed)")
print(f"entropy S(rho)    = {von_neumann_entropy(rho):.4f} (ln 2 = {np.log(2):.4f})")

print("\n== products stay pure ==")
rng = np.random.default_rng(1)
phi = StateVector.from_amplitudes(rng.normal(size=4), normalize=True)
eta = StateVector.from_amplitudes(rng.normal(size=4), normalize=True)
product = tensor(phi, eta)
rho_a = partial_trace(product, QubitPartition.equal_halves(4), keep="A")
print(f"purity of a product's subsystem: {purity(rho_a):.6f}")

print("\n== controlled swap on a superposed control ==")
plus = StateVector.from_amplitudes([1, 1] / np.sqrt(2))
swapped = tensor(plus, tensor(StateVector.basis(1, 0), StateVector.basis(1, 1)))
swapped = apply_cswap(swapped, 0, 1, 2)
print("(|0>|01> + |1>|10>)/sqrt(2):", np.round(swapped.amplitudes.real, 4))

print("\n== measurement removes the measured qubits ==")
outcome = measure_subsystem(bell, [1], "postselect", outcome=0)
print(
    f"measuring qubit 1 of the Bell state, outcome 0: probability {outcome.probability:.3f},"
    f" leftover state {np.round(outcome.post_state.amplitudes.real, 4)}"
)
check = measure_subsystem(product, [2, 3], "postselect", outcome=np.argmax(np.abs(eta.amplitudes)))
print(f"projecting a product's B register leaves A intact: fidelity "
      f"{fidelity_pure(check.post_state, phi):.6f}")
