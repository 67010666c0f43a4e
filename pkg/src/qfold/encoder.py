"""Stage 1: train the layered circuit to factor a dataset into products.

The objective is the mean over the dataset of
Tr(rho_A^2) + Tr(rho_B^2) evaluated after the circuit, where rho_A and
rho_B are the two reduced states of the bipartition.  It peaks at 2
exactly when every circuit output is a subsystem product, so training
ascends it; the reported residual is 2 minus the cost.  The subsystem
entropy version of the objective is kept as a diagnostic only, since its
gradient misbehaves as states approach purity.

Gradients are exact: a reverse statevector sweep with the co-state
(rho_A (x) I + I (x) rho_B)|out>, doubled because the objective is
quadratic in the evolved state.  `purity_shift_gradient` rebuilds the
same derivative from angle shifts of +/- pi/2 applied per circuit copy
(the objective is an expectation over two copies of the circuit, so each
angle contributes one shift term per copy); it exists to cross-check the
sweep and to charge shot budgets the way a sampling backend would.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import LayeredAnsatz, _BoundCircuit
from .errors import ConfigError, ParameterError, TrainingDivergenceError
from .simcore import QubitPartition, StateVector

_TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Stage1Config:
    """Training knobs.  init_scale bounds the uniform angle initialization;
    the small default matters: wide inits (say the full [-pi, pi]) land in
    flat non-product basins on the larger grids and never leave them."""

    depth: int
    learning_rate: float = 0.05
    max_iters: int = 500
    convergence_tol: float = 1e-3
    init_scale: float = 0.1
    batch_size: int | None = None
    batch_seed: int = 0
    seed: int = 0
    partition: QubitPartition | None = None

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"training needs depth >= 1, got {self.depth}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be positive, got {self.max_iters}")
        if self.convergence_tol < 0:
            raise ConfigError("convergence tolerance cannot be negative")
        if not 0 < self.init_scale <= math.pi:
            raise ConfigError(f"init_scale must be in (0, pi], got {self.init_scale}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}")


@dataclass(frozen=True)
class TrainRecord:
    iteration: int
    cost: float
    residual: float
    grad_l1: float
    step_l1: float
    cum_step_l1: float


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])

    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.records])


def delta_theta_l1(trace: TrainTrace) -> np.ndarray:
    """Cumulative sum of per-step |delta theta|_1, one entry per iteration."""
    if not trace.records:
        raise ConfigError("trace is empty")
    return np.array([r.cum_step_l1 for r in trace.records])


def write_trace_csv(trace: TrainTrace, path):
    """The training series as CSV; residual_norm = residual / 2."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "cost", "residual", "residual_norm", "grad_l1", "cum_delta_theta_l1"]
        )
        for r in trace.records:
            writer.writerow(
                [
                    r.iteration,
                    repr(r.cost),
                    repr(r.residual),
                    repr(r.residual / 2.0),
                    repr(r.grad_l1),
                    repr(r.cum_step_l1),
                ]
            )


# ---------------------------------------------------------------------------
# Dataset plumbing
# ---------------------------------------------------------------------------


def _state_matrix(dataset) -> tuple[np.ndarray, int]:
    """Column-stack the dataset as (dim, n_samples).

    Real-valued datasets (amplitude-encoded images, for one) stay in
    float64: the circuit gates are real matrices, so the whole training
    pass runs in real arithmetic at half the memory traffic.
    """
    states = []
    for item in dataset:
        sv = item.state if hasattr(item, "state") else item
        if not isinstance(sv, StateVector):
            raise ConfigError(f"dataset items must be states or samples, got {type(item)}")
        states.append(sv.amplitudes)
    if not states:
        raise ConfigError("dataset is empty")
    for s in states:
        if s.shape != states[0].shape:
            raise ConfigError("dataset states must share a qubit count")
    mat = np.stack(states, axis=1)
    n = states[0].shape[0].bit_length() - 1
    if np.all(mat.imag == 0.0):
        mat = np.ascontiguousarray(mat.real)
    return mat, n


def _resolve_partition(n: int, partition: QubitPartition | None) -> QubitPartition:
    if partition is None:
        return QubitPartition.equal_halves(n)
    if partition.n_qubits != n:
        raise ConfigError(f"partition covers {partition.n_qubits} qubits, states have {n}")
    return partition


def _split_axes(mat: np.ndarray, n: int, partition: QubitPartition) -> np.ndarray:
    """(dim, batch) -> (2**n_a, 2**n_b, batch) with A on the first axis."""
    na = len(partition.subsystem_a)
    nb = len(partition.subsystem_b)
    perm = tuple(partition.subsystem_a + partition.subsystem_b) + (n,)
    shaped = mat.reshape((2,) * n + (-1,)).transpose(perm)
    return shaped.reshape(1 << na, 1 << nb, -1)


def _unsplit_axes(block: np.ndarray, n: int, partition: QubitPartition) -> np.ndarray:
    perm = tuple(partition.subsystem_a + partition.subsystem_b) + (n,)
    inverse = np.argsort(perm)
    shaped = block.reshape((2,) * n + (-1,)).transpose(inverse)
    return shaped.reshape(1 << n, -1)


def _reduced_pair(split: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rho_a = np.einsum("ijb,kjb->bik", split, split.conj())
    rho_b = np.einsum("ijb,ikb->bjk", split, split.conj())
    return rho_a, rho_b


def _purity_terms(split: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rho_a, rho_b = _reduced_pair(split)
    pa = np.einsum("bij,bij->b", rho_a, rho_a.conj()).real
    pb = np.einsum("bij,bij->b", rho_b, rho_b.conj()).real
    return pa, pb


def _ansatz_for(params, n: int) -> LayeredAnsatz:
    params = np.asarray(params, dtype=float)
    if params.size % max(n, 1) != 0:
        raise ParameterError(
            f"parameter count {params.size} is not a multiple of {n} qubits"
        )
    return LayeredAnsatz(n, params.size // n)


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------


def purity_cost(params, dataset, partition: QubitPartition | None = None) -> float:
    """Mean of Tr(rho_A^2) + Tr(rho_B^2) after the circuit; in (0, 2]."""
    mat, n = _state_matrix(dataset)
    partition = _resolve_partition(n, partition)
    ansatz = _ansatz_for(params, n)
    out = _BoundCircuit(ansatz, params).forward(mat) if ansatz.depth else mat
    pa, pb = _purity_terms(_split_axes(out, n, partition))
    return float(np.mean(pa + pb))


def per_sample_purity_residuals(params, dataset, partition: QubitPartition | None = None):
    """2 - (Tr(rho_A^2) + Tr(rho_B^2)) per sample; zero means exact product."""
    mat, n = _state_matrix(dataset)
    partition = _resolve_partition(n, partition)
    ansatz = _ansatz_for(params, n)
    out = _BoundCircuit(ansatz, params).forward(mat) if ansatz.depth else mat
    pa, pb = _purity_terms(_split_axes(out, n, partition))
    return 2.0 - (pa + pb)


def entropy_cost(
    params, dataset, partition: QubitPartition | None = None, keep: str = "B"
) -> float:
    """Mean subsystem entropy after the circuit (diagnostic, not trained)."""
    mat, n = _state_matrix(dataset)
    partition = _resolve_partition(n, partition)
    ansatz = _ansatz_for(params, n)
    out = _BoundCircuit(ansatz, params).forward(mat) if ansatz.depth else mat
    split = _split_axes(out, n, partition)
    rho_a, rho_b = _reduced_pair(split)
    rho = rho_a if keep == "A" else rho_b
    evals = np.linalg.eigvalsh(rho)
    evals = np.clip(evals, 0.0, None)
    logs = np.where(evals > 1e-12, np.log(np.where(evals > 1e-12, evals, 1.0)), 0.0)
    return float(np.mean(-np.sum(evals * logs, axis=1)))


def _cost_and_gradient(circ: _BoundCircuit, mat, n, partition):
    out = circ.forward(mat)
    split = _split_axes(out, n, partition)
    rho_a, rho_b = _reduced_pair(split)
    pa = np.einsum("bij,bij->b", rho_a, rho_a.conj()).real
    pb = np.einsum("bij,bij->b", rho_b, rho_b.conj()).real
    cost = float(np.mean(pa + pb))
    # co-state (rho_A (x) I + I (x) rho_B)|out>, then doubled: the
    # objective is quadratic in the reduced states.
    lam = np.einsum("bik,kjb->ijb", rho_a, split) + np.einsum("bjk,ikb->ijb", rho_b, split)
    bra = _unsplit_axes(lam, n, partition)
    per_sample = circ.adjoint_gradients(out, bra)
    grad = 2.0 * per_sample.mean(axis=0)
    return cost, grad


def purity_gradient(params, dataset, partition: QubitPartition | None = None) -> np.ndarray:
    """Exact gradient of purity_cost via the reverse statevector sweep."""
    mat, n = _state_matrix(dataset)
    partition = _resolve_partition(n, partition)
    params = np.asarray(params, dtype=float)
    ansatz = _ansatz_for(params, n)
    _, grad = _cost_and_gradient(_BoundCircuit(ansatz, params), mat, n, partition)
    return grad


def purity_shift_gradient(params, dataset, partition: QubitPartition | None = None) -> np.ndarray:
    """Angle-shift form of the purity gradient (one shift per circuit copy).

    Component k is the dataset mean of
      Tr(rho_keep(t_k + pi/2) rho_keep) - Tr(rho_keep(t_k - pi/2) rho_keep)
    summed over both subsystems; the absence of the usual 1/2 reflects the
    two circuit copies through which each angle enters the objective.
    """
    mat, n = _state_matrix(dataset)
    partition = _resolve_partition(n, partition)
    params = np.asarray(params, dtype=float)
    ansatz = _ansatz_for(params, n)
    base = _split_axes(_BoundCircuit(ansatz, params).forward(mat), n, partition)
    rho_a, rho_b = _reduced_pair(base)
    grad = np.zeros(params.size)
    for k in range(params.size):
        terms = []
        for sign in (1.0, -1.0):
            shifted = params.copy()
            shifted[k] += sign * math.pi / 2
            split = _split_axes(_BoundCircuit(ansatz, shifted).forward(mat), n, partition)
            sa, sb = _reduced_pair(split)
            overlap_a = np.einsum("bij,bji->b", sa, rho_a).real
            overlap_b = np.einsum("bij,bji->b", sb, rho_b).real
            terms.append(overlap_a + overlap_b)
        grad[k] = float(np.mean(terms[0] - terms[1]))
    return grad


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def train_stage1(dataset, config: Stage1Config):
    """Gradient-ascend the purity objective; returns (params, trace).

    Stops when the residual 2 - cost drops below the configured tolerance
    or after max_iters.  The trace records one entry per evaluated
    iteration, including the step taken from it, and the run is fully
    reproducible from (seed, batch_seed).
    """
    mat, n = _state_matrix(dataset)
    partition = _resolve_partition(n, config.partition)
    ansatz = LayeredAnsatz(n, config.depth)
    rng = np.random.default_rng(config.seed)
    params = rng.uniform(-config.init_scale, config.init_scale, ansatz.n_params)
    batch_rng = np.random.default_rng(config.batch_seed)

    trace = TrainTrace()
    cum = 0.0
    for it in range(config.max_iters):
        circ = _BoundCircuit(ansatz, params)
        cost, grad = _cost_and_gradient(circ, mat, n, partition)
        if config.batch_size is not None and config.batch_size < mat.shape[1]:
            pick = batch_rng.choice(mat.shape[1], size=config.batch_size, replace=False)
            _, grad = _cost_and_gradient(circ, mat[:, np.sort(pick)], n, partition)
        if not np.isfinite(cost) or not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError(
                f"non-finite cost or gradient at iteration {it}", trace=trace
            )
        residual = 2.0 - cost
        grad_l1 = float(np.abs(grad).sum())
        if residual < config.convergence_tol:
            trace.records.append(TrainRecord(it, cost, residual, grad_l1, 0.0, cum))
            break
        step = config.learning_rate * grad
        step_l1 = float(np.abs(step).sum())
        cum += step_l1
        trace.records.append(TrainRecord(it, cost, residual, grad_l1, step_l1, cum))
        params = params + step
    return params, trace
