"""Variational classification of folded states.

The predictor is the sign of a single-qubit Z expectation after a
trainable circuit V: positive means bars (+1), negative stripes (-1),
with ties resolved to bars.  Training minimizes the summed squared label
error  sum_i (l_i - <Z>_i)^2  by plain gradient descent.

Two circuit modes:

* generic: one layered template over every qubit of the folded state
  (ancilla included), Z read from the first register qubit by default.
* block-diagonal: V = |0><0| (x) V0 + |1><1| (x) V1 on the ancilla, Z
  read from the last qubit by default.  Because nothing mixes the
  ancilla branches and Z acts off the ancilla, the cost only sees
  w0 * <Z>_phi + w1 * <Z>_eta: any phase between the branches drops out
  exactly.  Rebalancing the branch weights to 1/2 each removes the
  amplitude dependence as well, which makes the rebalanced gradient a
  deterministic function of the two factors alone; that gradient is what
  block-diagonal training uses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (
    BlockDiagonalAnsatz,
    LayeredAnsatz,
    _BoundCircuit,
    apply_ansatz,
    apply_block_diagonal,
)
from .errors import (
    ConfigError,
    DegenerateBranchError,
    DimensionError,
    TrainingDivergenceError,
)
from .simcore import StateVector

BRANCH_MASS_FLOOR = 1e-12


@dataclass(frozen=True)
class ClassifierConfig:
    ansatz: object  # LayeredAnsatz | BlockDiagonalAnsatz
    learning_rate: float = 0.001
    max_iters: int = 100
    readout_qubit: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be positive, got {self.max_iters}")
        n = self.ansatz.n_qubits
        r = self.readout
        if not 0 <= r < n:
            raise ConfigError(f"readout qubit {r} out of range for {n} qubits")
        if isinstance(self.ansatz, BlockDiagonalAnsatz) and r == self.ansatz.index_qubit:
            raise ConfigError("readout must differ from the index qubit")

    @property
    def readout(self) -> int:
        if self.readout_qubit is not None:
            return self.readout_qubit
        if isinstance(self.ansatz, BlockDiagonalAnsatz):
            return self.ansatz.n_qubits - 1
        # folded states carry the ancilla on qubit 0; read the register
        return 1 if self.ansatz.n_qubits > 1 else 0


@dataclass(frozen=True)
class ClassifierRecord:
    iteration: int
    cost: float
    grad_l1: float
    step_l1: float
    cum_step_l1: float


@dataclass
class ClassifierTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class: dict
    confusion: dict
    train_accuracy: float | None = None


def _z_signs(n: int, readout: int) -> np.ndarray:
    return 1.0 - 2.0 * ((np.arange(1 << n) >> (n - 1 - readout)) & 1)


def z_expectation(state: StateVector, params, ansatz, readout_qubit: int) -> float:
    """<Z on readout_qubit> after running the circuit; in [-1, 1]."""
    if state.n_qubits != ansatz.n_qubits:
        raise DimensionError(
            f"ansatz acts on {ansatz.n_qubits} qubits, state has {state.n_qubits}"
        )
    if isinstance(ansatz, BlockDiagonalAnsatz):
        p0, p1 = ansatz.split_params(params)
        out = apply_block_diagonal(ansatz, p0, p1, state)
    else:
        out = apply_ansatz(ansatz, params, state)
    signs = _z_signs(out.n_qubits, readout_qubit)
    return float(np.dot(signs, np.abs(out.amplitudes) ** 2))


def _check_labels(samples):
    samples = list(samples)
    if not samples:
        raise ConfigError("dataset is empty")
    for _, label in samples:
        if label not in (1, -1):
            raise ConfigError(f"labels must be +1 or -1, got {label}")
    return samples


def classification_cost(params, samples, config: ClassifierConfig) -> float:
    """sum_i (l_i - <Z>_i)^2 over (state, label) pairs."""
    samples = _check_labels(samples)
    total = 0.0
    for state, label in samples:
        z = z_expectation(state, params, config.ansatz, config.readout)
        total += (label - z) ** 2
    return total


def predict(state: StateVector, params, config: ClassifierConfig) -> int:
    """+1 (bars) when <Z> >= 0, else -1 (stripes)."""
    z = z_expectation(state, params, config.ansatz, config.readout)
    return 1 if z >= 0.0 else -1


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def _stack(samples) -> tuple[np.ndarray, np.ndarray, int]:
    mat = np.stack([s.amplitudes for s, _ in samples], axis=1)
    labels = np.array([label for _, label in samples], dtype=float)
    n = mat.shape[0].bit_length() - 1
    if np.all(mat.imag == 0.0):
        mat = np.ascontiguousarray(mat.real)
    return mat, labels, n


def _generic_cost_and_gradient(params, mat, labels, ansatz, readout):
    circ = _BoundCircuit(ansatz, params)
    out = circ.forward(mat)
    signs = _z_signs(ansatz.n_qubits, readout)
    z = np.einsum("i,ib->b", signs, np.abs(out) ** 2)
    cost = float(np.sum((labels - z) ** 2))
    coef = -2.0 * (labels - z)
    bra = signs[:, None] * out * coef[None, :]
    grads = circ.adjoint_gradients(out, bra)
    return cost, grads.sum(axis=0)


def _branches(mat: np.ndarray, n: int, index_qubit: int):
    """Split (dim, B) into the two index-qubit branches, unnormalized."""
    shaped = mat.reshape((2,) * n + (-1,))
    moved = np.moveaxis(shaped, index_qubit, 0)
    return moved.reshape(2, 1 << (n - 1), -1)


def _block_readout(readout: int, index_qubit: int) -> int:
    return readout - 1 if readout > index_qubit else readout


def _block_cost_and_gradient(params, mat, labels, block: BlockDiagonalAnsatz, readout):
    """Eq-style cost on the true states; gradient on the rebalanced ones.

    The rebalanced gradient treats every sample as if its two branches
    carried weight 1/2 each, which is exactly the branch-weight-free
    derivative the block-diagonal construction admits.
    """
    p0, p1 = block.split_params(params)
    branches = _branches(mat, block.n_qubits, block.index_qubit)
    w = np.sum(np.abs(branches) ** 2, axis=1)  # (2, B) branch masses
    if np.any(w < BRANCH_MASS_FLOOR):
        raise DegenerateBranchError("a sample has an empty ancilla branch")
    sub_signs = _z_signs(block.block0.n_qubits, _block_readout(readout, block.index_qubit))

    branch_runs = []
    zs = []
    for b, (blk, p) in enumerate(((block.block0, p0), (block.block1, p1))):
        circ = _BoundCircuit(blk, p)
        states = branches[b] / np.sqrt(w[b])[None, :]
        out = circ.forward(states)
        zs.append(np.einsum("i,ib->b", sub_signs, np.abs(out) ** 2))
        branch_runs.append((circ, out))
    z_true = w[0] * zs[0] + w[1] * zs[1]
    cost = float(np.sum((labels - z_true) ** 2))
    z_bal = 0.5 * (zs[0] + zs[1])
    coef = -2.0 * (labels - z_bal) * 0.5
    full_grad = []
    for circ, out in branch_runs:
        bra = sub_signs[:, None] * out * coef[None, :]
        full_grad.append(circ.adjoint_gradients(out, bra).sum(axis=0))
    return cost, np.concatenate(full_grad)


def classification_gradient(params, samples, config: ClassifierConfig) -> np.ndarray:
    """Exact gradient of the training objective (rebalanced in block mode)."""
    samples = _check_labels(samples)
    mat, labels, _ = _stack(samples)
    if isinstance(config.ansatz, BlockDiagonalAnsatz):
        _, grad = _block_cost_and_gradient(params, mat, labels, config.ansatz, config.readout)
    else:
        _, grad = _generic_cost_and_gradient(params, mat, labels, config.ansatz, config.readout)
    return grad


def classification_shift_gradient(params, samples, config: ClassifierConfig) -> np.ndarray:
    """Angle-shift cross-check of the generic-mode gradient.

    Chains d(l - z)^2 = -2 (l - z) dz with the rotation-shift rule for
    each <Z> expectation, so it matches `classification_gradient` in
    generic mode to numerical precision.
    """
    samples = _check_labels(samples)
    params = np.asarray(params, dtype=float)
    zs = np.array(
        [z_expectation(s, params, config.ansatz, config.readout) for s, _ in samples]
    )
    labels = np.array([label for _, label in samples], dtype=float)
    grad = np.zeros(params.size)
    for k in range(params.size):
        up = params.copy()
        up[k] += math.pi / 2
        down = params.copy()
        down[k] -= math.pi / 2
        dz = np.array(
            [
                0.5
                * (
                    z_expectation(s, up, config.ansatz, config.readout)
                    - z_expectation(s, down, config.ansatz, config.readout)
                )
                for s, _ in samples
            ]
        )
        grad[k] = float(np.sum(-2.0 * (labels - zs) * dz))
    return grad


def reweighted_gradient(sample, params, config: ClassifierConfig, branch_weights) -> np.ndarray:
    """Per-sample gradient with the index register rebalanced to 1/2 each.

    branch_weights are the measured (or exact) branch masses; they only
    gate degeneracy, since rebalancing makes the result independent of
    them and of any branch phase.  Requires a block-diagonal ansatz.
    """
    if not isinstance(config.ansatz, BlockDiagonalAnsatz):
        raise ConfigError("rebalanced gradients need a block-diagonal ansatz")
    w0, w1 = branch_weights
    if w0 < BRANCH_MASS_FLOOR or w1 < BRANCH_MASS_FLOOR:
        raise DegenerateBranchError(f"branch weights {w0:.3e}/{w1:.3e} too small")
    state, label = sample
    block = config.ansatz
    branches = _branches(state.amplitudes[:, None], block.n_qubits, block.index_qubit)
    mass = np.sum(np.abs(branches) ** 2, axis=1)[:, 0]
    if np.any(mass < BRANCH_MASS_FLOOR):
        raise DegenerateBranchError("sample has an empty ancilla branch")
    balanced = np.concatenate(
        [branches[0][:, 0] / math.sqrt(2 * mass[0]), branches[1][:, 0] / math.sqrt(2 * mass[1])]
    )
    if block.index_qubit != 0:
        n = block.n_qubits
        shaped = balanced.reshape((2,) + (2,) * (n - 1))
        balanced = np.moveaxis(shaped, 0, block.index_qubit).reshape(-1)
    mat = balanced[:, None]
    if np.all(mat.imag == 0.0):
        mat = np.ascontiguousarray(mat.real)
    _, grad = _block_cost_and_gradient(
        params, mat, np.array([float(label)]), block, config.readout
    )
    return grad


# ---------------------------------------------------------------------------
# Training and evaluation
# ---------------------------------------------------------------------------


def train_classifier(train_samples, config: ClassifierConfig):
    """Gradient descent on the summed squared label error; returns (params, trace)."""
    samples = _check_labels(train_samples)
    mat, labels, _ = _stack(samples)
    rng = np.random.default_rng(config.seed)
    params = rng.uniform(-math.pi, math.pi, config.ansatz.n_params)
    block_mode = isinstance(config.ansatz, BlockDiagonalAnsatz)

    trace = ClassifierTrace()
    cum = 0.0
    for it in range(config.max_iters):
        if block_mode:
            cost, grad = _block_cost_and_gradient(
                params, mat, labels, config.ansatz, config.readout
            )
        else:
            cost, grad = _generic_cost_and_gradient(
                params, mat, labels, config.ansatz, config.readout
            )
        if not np.isfinite(cost) or not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError(
                f"non-finite cost or gradient at iteration {it}", trace=trace
            )
        step = config.learning_rate * grad
        step_l1 = float(np.abs(step).sum())
        cum += step_l1
        trace.records.append(
            ClassifierRecord(it, cost, float(np.abs(grad).sum()), step_l1, cum)
        )
        params = params - step
    return params, trace


def evaluate_classifier(
    test_samples, params, config: ClassifierConfig, train_samples=None
) -> EvalReport:
    """Accuracy, per-class accuracy, and confusion counts on held-out data."""
    samples = _check_labels(test_samples)
    confusion = {"tp": 0, "fn": 0, "fp": 0, "tn": 0}
    for state, label in samples:
        guess = predict(state, params, config)
        if label == 1:
            confusion["tp" if guess == 1 else "fn"] += 1
        else:
            confusion["tn" if guess == -1 else "fp"] += 1
    total = sum(confusion.values())
    correct = confusion["tp"] + confusion["tn"]
    bars_total = confusion["tp"] + confusion["fn"]
    stripes_total = confusion["tn"] + confusion["fp"]
    per_class = {
        "bars": confusion["tp"] / bars_total if bars_total else float("nan"),
        "stripes": confusion["tn"] / stripes_total if stripes_total else float("nan"),
    }
    train_accuracy = None
    if train_samples is not None:
        hits = sum(
            1 for state, label in train_samples if predict(state, params, config) == label
        )
        train_accuracy = hits / len(list(train_samples))
    return EvalReport(correct / total, per_class, confusion, train_accuracy)


def write_classifier_trace_csv(trace: ClassifierTrace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "cost", "grad_l1", "cum_delta_theta_l1"])
        for r in trace.records:
            writer.writerow([r.iteration, repr(r.cost), repr(r.grad_l1), repr(r.cum_step_l1)])
