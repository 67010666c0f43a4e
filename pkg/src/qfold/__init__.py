"""qfold: variational qubit folding.

Train a layered circuit to factor a dataset of states into subsystem
products, fold each product onto half the qubits plus one ancilla via
controlled swaps and post-selection, and classify the folded states with
a second variational circuit.  Everything runs on a dense numpy
statevector simulator.

Module map: `simcore` (states, gates, reductions, measurement), `bas`
(bars-and-stripes data), `ansatz` (circuit templates and gradients),
`swaptest` (shot-based overlap/purity estimators), `encoder` (stage-1
factor training), `compressor` (stage-2 fold/unfold), `classifier`
(label circuit), `cli` (pipeline and subcommands).
"""

from .simcore import (
    DensityMatrix,
    MeasurementOutcome,
    QubitPartition,
    StateVector,
    apply_cnot,
    apply_controlled_ry,
    apply_cswap,
    apply_ry,
    fidelity_pure,
    inner_product,
    measure_subsystem,
    partial_trace,
    purity,
    tensor,
    von_neumann_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "MeasurementOutcome",
    "QubitPartition",
    "StateVector",
    "apply_cnot",
    "apply_controlled_ry",
    "apply_cswap",
    "apply_ry",
    "fidelity_pure",
    "inner_product",
    "measure_subsystem",
    "partial_trace",
    "purity",
    "tensor",
    "von_neumann_entropy",
    "__version__",
]
