"""Parameterized circuit templates and their gradients.

The workhorse is a layered template: each layer is one Ry per qubit (one
independent angle each) followed by a ladder of CNOTs with control i and
target i+1 applied in ascending order.  There is no trailing rotation
column after the last ladder, so the template on n qubits with depth D
carries exactly n*D angles, laid out layer-major.

The block-diagonal template used for classification splits on an index
qubit: V = |0><0| (x) V0 + |1><1| (x) V1, with V0 and V1 layered
templates on the remaining qubits.  Nothing it does can move amplitude
between the two index branches, which is what makes branch phases
invisible to it.

Gradients come in two flavors:

* an exact reverse-mode sweep over the statevector (`_adjoint_gradients`),
  used by the trainers, and
* the rotation-shift rule (`parameter_shift_gradient`), evaluating the
  cost at angle +/- pi/2 per parameter.  The generic helper assumes each
  parameter enters exactly one rotation of one circuit; costs that are
  quadratic in the evolved state (purity-style) must instead sum the
  shift over each location where the angle appears, which the training
  modules provide for their own costs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParameterError
from .simcore import StateVector, _apply_1q, _apply_cnot_raw

ParamVector = np.ndarray


@dataclass(frozen=True)
class LayeredAnsatz:
    """Layered Ry/CNOT-ladder template; depth 0 is the identity circuit."""

    n_qubits: int
    depth: int

    def __post_init__(self):
        if self.n_qubits < 1 or self.depth < 0:
            raise ConfigError(
                f"need at least one qubit and depth >= 0, got n={self.n_qubits} D={self.depth}"
            )

    @property
    def ladder_pairs(self) -> tuple:
        return tuple((i, i + 1) for i in range(self.n_qubits - 1))

    @property
    def n_params(self) -> int:
        return self.n_qubits * self.depth

    def gate_sequence(self):
        """Gates in application order: ("ry", qubit, param_index) or ("cnot", c, t)."""
        gates = []
        for layer in range(self.depth):
            for q in range(self.n_qubits):
                gates.append(("ry", q, layer * self.n_qubits + q))
            for c, t in self.ladder_pairs:
                gates.append(("cnot", c, t))
        return gates


@dataclass(frozen=True)
class BlockDiagonalAnsatz:
    index_qubit: int
    block0: LayeredAnsatz
    block1: LayeredAnsatz

    def __post_init__(self):
        if self.block0.n_qubits != self.block1.n_qubits:
            raise ConfigError("blocks must act on the same number of qubits")
        if not 0 <= self.index_qubit <= self.block0.n_qubits:
            raise ConfigError(f"index qubit {self.index_qubit} out of range")

    @property
    def n_qubits(self) -> int:
        return self.block0.n_qubits + 1

    @property
    def n_params(self) -> int:
        return self.block0.n_params + self.block1.n_params

    def split_params(self, params: ParamVector):
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ParameterError(
                f"expected {self.n_params} parameters, got {params.shape}"
            )
        return params[: self.block0.n_params], params[self.block0.n_params :]


def _check_params(ansatz: LayeredAnsatz, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.n_params,):
        raise ParameterError(
            f"ansatz expects {ansatz.n_params} parameters, got shape {params.shape}"
        )
    if not np.all(np.isfinite(params)):
        raise ParameterError("parameters must be finite")
    return params


# ---------------------------------------------------------------------------
# Batched circuit walks on raw (batch, dim) arrays.
# ---------------------------------------------------------------------------


def _walk(amps: np.ndarray, n: int, gates, params: np.ndarray) -> np.ndarray:
    for gate in gates:
        if gate[0] == "ry":
            _, q, k = gate
            c, s = math.cos(params[k] / 2.0), math.sin(params[k] / 2.0)
            amps = _apply_1q(amps, n, q, c, -s, s, c)
        else:
            _, ctrl, tgt = gate
            amps = _apply_cnot_raw(amps, n, ctrl, tgt)
    return amps


def _walk_inverse(amps: np.ndarray, n: int, gates, params: np.ndarray) -> np.ndarray:
    for gate in reversed(gates):
        if gate[0] == "ry":
            _, q, k = gate
            c, s = math.cos(params[k] / 2.0), math.sin(params[k] / 2.0)
            amps = _apply_1q(amps, n, q, c, s, -s, c)
        else:
            _, ctrl, tgt = gate
            amps = _apply_cnot_raw(amps, n, ctrl, tgt)
    return amps


def _apply_y_generator(amps: np.ndarray, n: int, qubit: int) -> np.ndarray:
    """Apply -i*Y/2 (the Ry generator), a real 2x2 map."""
    return _apply_1q(amps, n, qubit, 0.0, -0.5, 0.5, 0.0)


class _BoundCircuit:
    """A gate list with its bound angles, shared by the training modules."""

    def __init__(self, ansatz: LayeredAnsatz, params):
        self.ansatz = ansatz
        self.params = _check_params(ansatz, params)
        self.gates = ansatz.gate_sequence()
        self.n = ansatz.n_qubits

    def forward(self, amps: np.ndarray) -> np.ndarray:
        """amps: (dim,) single state or (dim, batch) column-stacked batch."""
        return _walk(amps, self.n, self.gates, self.params)

    def inverse(self, amps: np.ndarray) -> np.ndarray:
        return _walk_inverse(amps, self.n, self.gates, self.params)

    def adjoint_gradients(self, ket: np.ndarray, bra: np.ndarray) -> np.ndarray:
        """Exact per-sample gradients of <psi|U^dag O U|psi| via a reverse sweep.

        ket holds the final states U|psi> column-stacked as (dim, batch),
        bra the co-states O U|psi> for an observable O frozen at the
        current parameters.  Walking the circuit backwards, each rotation
        site contributes 2*Re<bra|(-iY/2)|ket>, giving (batch, n_params).
        """
        batch = ket.shape[1]
        grads = np.zeros((batch, self.ansatz.n_params))
        for gate in reversed(self.gates):
            if gate[0] == "ry":
                _, q, k = gate
                tangent = _apply_y_generator(ket, self.n, q)
                grads[:, k] += 2.0 * np.einsum("ib,ib->b", bra.conj(), tangent).real
                c, s = math.cos(self.params[k] / 2.0), math.sin(self.params[k] / 2.0)
                ket = _apply_1q(ket, self.n, q, c, s, -s, c)
                bra = _apply_1q(bra, self.n, q, c, s, -s, c)
            else:
                ket = _apply_cnot_raw(ket, self.n, gate[1], gate[2])
                bra = _apply_cnot_raw(bra, self.n, gate[1], gate[2])
        return grads


# ---------------------------------------------------------------------------
# Public application ops
# ---------------------------------------------------------------------------


def apply_ansatz(ansatz: LayeredAnsatz, params, state: StateVector) -> StateVector:
    """Run the layered circuit over the state."""
    if state.n_qubits != ansatz.n_qubits:
        raise ParameterError(
            f"ansatz acts on {ansatz.n_qubits} qubits, state has {state.n_qubits}"
        )
    circ = _BoundCircuit(ansatz, params)
    return StateVector(state.n_qubits, circ.forward(state.amplitudes))


def apply_adjoint(ansatz: LayeredAnsatz, params, state: StateVector) -> StateVector:
    """Run the exact inverse of apply_ansatz."""
    if state.n_qubits != ansatz.n_qubits:
        raise ParameterError(
            f"ansatz acts on {ansatz.n_qubits} qubits, state has {state.n_qubits}"
        )
    circ = _BoundCircuit(ansatz, params)
    return StateVector(state.n_qubits, circ.inverse(state.amplitudes))


def apply_block_diagonal(
    block: BlockDiagonalAnsatz, params0, params1, state: StateVector
) -> StateVector:
    """Apply V0 to the index-qubit |0> component and V1 to the |1> component."""
    if state.n_qubits != block.n_qubits:
        raise ParameterError(
            f"block ansatz acts on {block.n_qubits} qubits, state has {state.n_qubits}"
        )
    n = state.n_qubits
    sub_n = n - 1
    shaped = state.amplitudes.reshape((2,) * n)
    branches = np.moveaxis(shaped, block.index_qubit, 0).reshape(2, 1 << sub_n)
    out = np.empty_like(branches)
    out[0] = _BoundCircuit(block.block0, params0).forward(branches[0])
    out[1] = _BoundCircuit(block.block1, params1).forward(branches[1])
    restored = np.moveaxis(out.reshape((2,) * n), 0, block.index_qubit)
    return StateVector(n, restored.reshape(-1))


def parameter_shift_gradient(cost, params) -> np.ndarray:
    """Rotation-shift gradient [cost(t + pi/2) - cost(t - pi/2)] / 2 per angle.

    Exact when each parameter enters a single Ry of a single circuit
    evaluation inside an expectation-form cost.  Where a parameter
    appears at several circuit locations the shifts must be applied per
    location and summed; see the purity trainer for that variant.
    """
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    for k in range(params.size):
        shifted = params.copy()
        shifted[k] += math.pi / 2
        up = cost(shifted)
        shifted[k] -= math.pi
        down = cost(shifted)
        if not (np.isfinite(up) and np.isfinite(down)):
            raise FloatingPointError(f"non-finite cost at parameter {k}")
        grad[k] = 0.5 * (up - down)
    return grad


# ---------------------------------------------------------------------------
# Parameter checkpoints
# ---------------------------------------------------------------------------


def _describe(ansatz) -> dict:
    if isinstance(ansatz, LayeredAnsatz):
        return {"kind": "layered", "n_qubits": ansatz.n_qubits, "depth": ansatz.depth}
    if isinstance(ansatz, BlockDiagonalAnsatz):
        return {
            "kind": "block_diagonal",
            "index_qubit": ansatz.index_qubit,
            "block_n_qubits": ansatz.block0.n_qubits,
            "block0_depth": ansatz.block0.depth,
            "block1_depth": ansatz.block1.depth,
        }
    raise ConfigError(f"unknown ansatz type {type(ansatz).__name__}")


def _from_descriptor(desc: dict):
    if desc["kind"] == "layered":
        return LayeredAnsatz(desc["n_qubits"], desc["depth"])
    if desc["kind"] == "block_diagonal":
        return BlockDiagonalAnsatz(
            desc["index_qubit"],
            LayeredAnsatz(desc["block_n_qubits"], desc["block0_depth"]),
            LayeredAnsatz(desc["block_n_qubits"], desc["block1_depth"]),
        )
    raise ConfigError(f"unknown ansatz kind {desc.get('kind')!r}")


def save_checkpoint(path, ansatz, params):
    params = np.asarray(params, dtype=float)
    expected = ansatz.n_params
    if params.shape != (expected,):
        raise ParameterError(f"expected {expected} parameters, got shape {params.shape}")
    payload = {"ansatz": _describe(ansatz), "params": params.tolist()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    with open(path) as fh:
        payload = json.load(fh)
    ansatz = _from_descriptor(payload["ansatz"])
    params = np.asarray(payload["params"], dtype=float)
    if params.shape != (ansatz.n_params,):
        raise ParameterError(
            f"checkpoint carries {params.shape} parameters, ansatz needs {ansatz.n_params}"
        )
    return ansatz, params
