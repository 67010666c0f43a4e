"""Dense statevector engine: gates, partial trace, purity, entropy, measurement.

Conventions, obeyed by every module in this package:

* Qubit 0 is the most significant bit of a basis index, i.e. the basis
  state |q0 q1 .. q_{n-1}> sits at index sum_k q_k * 2**(n - 1 - k).
* Subsystem A of a bipartition occupies the low-indexed qubits, so
  reshaping an amplitude vector to (2**n_a, 2**n_b) puts A on the rows.
* Angles are radians.  Ry(t) = exp(-i t Y / 2) =
  [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]].
* Measurement removes the measured qubits from the register; the
  surviving qubits keep their relative order.

All operations are pure: they return new values and never mutate their
inputs, so states can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    GateError,
    ImpossibleOutcomeError,
    StateError,
)

NORM_ATOL = 1e-10
HERMITIAN_ATOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
ENTROPY_CUTOFF = 1e-12
POSTSELECT_MIN_PROB = 1e-12


def _infer_n_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or (1 << n) != dim:
        raise DimensionError(f"amplitude vector length {dim} is not a power of two")
    return n


# ---------------------------------------------------------------------------
# Raw kernels.  They act on arrays of shape (dim,) or (dim, batch): the state
# axis comes first and an optional batch axis last, so every qubit slice is a
# large contiguous block and the training code can push a whole dataset
# through a circuit per call.  Public gate functions wrap single states.
# ---------------------------------------------------------------------------


def _slices(ndim: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * ndim
    for axis, value in fixed.items():
        idx[axis] = value
    return tuple(idx)


def _apply_1q(amps: np.ndarray, n: int, qubit: int, u00, u01, u10, u11) -> np.ndarray:
    u = np.array([[u00, u01], [u10, u11]])
    view = amps.reshape(1 << qubit, 2, -1)
    return np.matmul(u, view).reshape(amps.shape)


def _two_axis_view(amps: np.ndarray, q1: int, q2: int) -> np.ndarray:
    return amps.reshape(1 << q1, 2, 1 << (q2 - q1 - 1), 2, -1)


def _apply_cnot_raw(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    q1, q2 = (control, target) if control < target else (target, control)
    view = _two_axis_view(amps, q1, q2)
    c_ax, t_ax = (1, 3) if control == q1 else (3, 1)
    out = amps.copy().reshape(view.shape)
    i10 = _slices(5, {c_ax: 1, t_ax: 0})
    i11 = _slices(5, {c_ax: 1, t_ax: 1})
    out[i10] = view[i11]
    out[i11] = view[i10]
    return out.reshape(amps.shape)


def _apply_cswap_raw(amps: np.ndarray, n: int, control: int, a: int, b: int) -> np.ndarray:
    qs = sorted((control, a, b))
    view = amps.reshape(
        1 << qs[0], 2, 1 << (qs[1] - qs[0] - 1), 2, 1 << (qs[2] - qs[1] - 1), 2, -1
    )
    ax = {q: 1 + 2 * i for i, q in enumerate(qs)}
    out = amps.copy().reshape(view.shape)
    i01 = _slices(7, {ax[control]: 1, ax[a]: 0, ax[b]: 1})
    i10 = _slices(7, {ax[control]: 1, ax[a]: 1, ax[b]: 0})
    out[i01] = view[i10]
    out[i10] = view[i01]
    return out.reshape(amps.shape)


def _apply_cry_raw(
    amps: np.ndarray, n: int, control: int, target: int, angle: float, control_value: int
) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    q1, q2 = (control, target) if control < target else (target, control)
    view = _two_axis_view(amps, q1, q2)
    c_ax, t_ax = (1, 3) if control == q1 else (3, 1)
    out = amps.copy().reshape(view.shape)
    lo = _slices(5, {c_ax: control_value, t_ax: 0})
    hi = _slices(5, {c_ax: control_value, t_ax: 1})
    a, b = view[lo], view[hi]
    out[lo] = c * a - s * b
    out[hi] = s * a + c * b
    return out.reshape(amps.shape)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitudes of an n-qubit pure state."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = self.amplitudes
        if amps.ndim != 1:
            raise DimensionError("amplitudes must be a 1-D array")
        if amps.shape[0] != 1 << self.n_qubits:
            raise DimensionError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got {amps.shape[0]}"
            )

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128).copy()
        n = _infer_n_qubits(amps.shape[0])
        norm = float(np.linalg.norm(amps))
        if normalize:
            if norm < 1e-14:
                raise StateError("cannot normalize a zero vector")
            amps = amps / norm
        elif abs(norm - 1.0) > NORM_ATOL:
            raise StateError(f"amplitudes have norm {norm:.3e}, expected 1")
        return cls(n, amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        dim = 1 << n_qubits
        if not 0 <= index < dim:
            raise IndexError(f"basis index {index} out of range for {n_qubits} qubits")
        amps = np.zeros(dim, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class DensityMatrix:
    """Reduced state of a subsystem; validated on construction."""

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        m = self.entries
        dim = 1 << self.n_qubits
        if m.shape != (dim, dim):
            raise DimensionError(f"expected shape {(dim, dim)}, got {m.shape}")
        if not np.allclose(m, m.conj().T, atol=HERMITIAN_ATOL):
            raise StateError("density matrix is not Hermitian")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > NORM_ATOL:
            raise StateError(f"density matrix has trace {tr:.6g}, expected 1")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < EIGENVALUE_FLOOR:
            raise StateError(f"density matrix has negative eigenvalue {evals.min():.3e}")

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


@dataclass(frozen=True)
class QubitPartition:
    """Bipartition of a register into ordered subsystems A and B."""

    subsystem_a: tuple
    subsystem_b: tuple

    def __post_init__(self):
        a = tuple(self.subsystem_a)
        b = tuple(self.subsystem_b)
        object.__setattr__(self, "subsystem_a", a)
        object.__setattr__(self, "subsystem_b", b)
        n = len(a) + len(b)
        if set(a) & set(b):
            raise ConfigError("subsystems overlap")
        if set(a) | set(b) != set(range(n)):
            raise ConfigError(f"subsystems must cover qubits 0..{n - 1} exactly")

    @classmethod
    def equal_halves(cls, n_qubits: int) -> "QubitPartition":
        if n_qubits % 2 != 0:
            raise ConfigError(f"cannot halve {n_qubits} qubits")
        half = n_qubits // 2
        return cls(tuple(range(half)), tuple(range(half, n_qubits)))

    @property
    def n_qubits(self) -> int:
        return len(self.subsystem_a) + len(self.subsystem_b)


@dataclass(frozen=True)
class MeasurementOutcome:
    """Result of measuring a sub-register: outcome, its probability, leftover state."""

    basis_index: int
    probability: float
    post_state: StateVector


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


def _check_qubit(state: StateVector, qubit: int):
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits} qubits")


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    """Rotate one qubit about Y: exp(-i*angle*Y/2)."""
    _check_qubit(state, qubit)
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    amps = _apply_1q(state.amplitudes, state.n_qubits, qubit, c, -s, s, c)
    return StateVector(state.n_qubits, amps)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Flip the target bit wherever the control bit is set."""
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise GateError("cnot control and target must differ")
    amps = _apply_cnot_raw(state.amplitudes, state.n_qubits, control, target)
    return StateVector(state.n_qubits, amps)


def apply_cswap(state: StateVector, control: int, target_a: int, target_b: int) -> StateVector:
    """Exchange two target bits wherever the control bit is set (Fredkin gate)."""
    for q in (control, target_a, target_b):
        _check_qubit(state, q)
    if len({control, target_a, target_b}) != 3:
        raise GateError("cswap needs three distinct qubits")
    amps = _apply_cswap_raw(state.amplitudes, state.n_qubits, control, target_a, target_b)
    return StateVector(state.n_qubits, amps)


def apply_controlled_ry(
    state: StateVector, control: int, target: int, angle: float, control_value: int = 1
) -> StateVector:
    """Apply Ry(angle) on the target within the branch where control == control_value."""
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise GateError("controlled-ry control and target must differ")
    if control_value not in (0, 1):
        raise GateError(f"control_value must be 0 or 1, got {control_value}")
    amps = _apply_cry_raw(
        state.amplitudes, state.n_qubits, control, target, angle, control_value
    )
    return StateVector(state.n_qubits, amps)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Product state a (x) b; a's qubits become the high-order ones."""
    return StateVector(a.n_qubits + b.n_qubits, np.kron(a.amplitudes, b.amplitudes))


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def partial_trace(state: StateVector, partition: QubitPartition, keep: str = "A") -> DensityMatrix:
    """Reduced density matrix of one side of a bipartition.

    Computed by permuting the qubit axes into (A, B) order and contracting
    the traced register by direct index summation.
    """
    if partition.n_qubits != state.n_qubits:
        raise DimensionError(
            f"partition covers {partition.n_qubits} qubits, state has {state.n_qubits}"
        )
    if keep not in ("A", "B"):
        raise ConfigError(f"keep must be 'A' or 'B', got {keep!r}")
    n = state.n_qubits
    na, nb = len(partition.subsystem_a), len(partition.subsystem_b)
    perm = list(partition.subsystem_a) + list(partition.subsystem_b)
    m = state.amplitudes.reshape((2,) * n).transpose(perm).reshape(1 << na, 1 << nb)
    if keep == "A":
        rho = m @ m.conj().T
        return DensityMatrix(na, rho)
    rho = m.T @ m.conj()
    return DensityMatrix(nb, rho)


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2); 1 for pure states, 2**-n for the maximally mixed state."""
    # For Hermitian rho, Tr(rho^2) is the squared Frobenius norm.
    return float(np.vdot(rho.entries, rho.entries).real)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S = -Tr(rho ln rho), natural log; zero iff rho is pure."""
    evals = np.linalg.eigvalsh(rho.entries)
    if evals.min() < EIGENVALUE_FLOOR:
        raise StateError(f"eigenvalue {evals.min():.3e} below the validity floor")
    evals = np.clip(evals, 0.0, None)
    evals = evals[evals > ENTROPY_CUTOFF]
    return float(-np.sum(evals * np.log(evals)))


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------


def measure_subsystem(
    state: StateVector,
    qubits,
    mode: str,
    *,
    seed: int | None = None,
    outcome: int | None = None,
) -> MeasurementOutcome:
    """Measure a sub-register in the computational basis and drop it.

    mode "sampled" draws the outcome from the Born distribution using the
    given seed; mode "postselect" projects onto the requested outcome and
    fails if its probability is below 1e-12.  The outcome index reads the
    measured qubits in the order given, first qubit most significant.
    """
    qubits = list(qubits)
    n = state.n_qubits
    if not qubits:
        raise ConfigError("must measure at least one qubit")
    if len(set(qubits)) != len(qubits):
        raise ConfigError("measured qubits must be distinct")
    for q in qubits:
        _check_qubit(state, q)
    if len(qubits) >= n:
        raise ConfigError("measurement must leave at least one qubit")

    rest = [q for q in range(n) if q not in qubits]
    m = len(qubits)
    table = state.amplitudes.reshape((2,) * n).transpose(qubits + rest).reshape(1 << m, -1)
    probs = np.abs(table) ** 2
    marginal = probs.sum(axis=1)

    if mode == "postselect":
        if outcome is None:
            raise ConfigError("postselect mode requires an outcome")
        if not 0 <= outcome < (1 << m):
            raise ConfigError(f"outcome {outcome} out of range for {m} measured qubits")
        k = int(outcome)
    elif mode == "sampled":
        if seed is None:
            raise ConfigError("sampled mode requires a seed")
        rng = np.random.default_rng(seed)
        p = marginal / marginal.sum()
        k = int(rng.choice(1 << m, p=p))
    else:
        raise ConfigError(f"unknown measurement mode {mode!r}")

    p_k = float(marginal[k])
    if p_k <= POSTSELECT_MIN_PROB:
        raise ImpossibleOutcomeError(
            f"outcome {k} has probability {p_k:.3e}, below {POSTSELECT_MIN_PROB}"
        )
    post = table[k] / math.sqrt(p_k)
    return MeasurementOutcome(k, p_k, StateVector(n - m, post))


# ---------------------------------------------------------------------------
# Overlaps
# ---------------------------------------------------------------------------


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity_pure(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for pure states."""
    return abs(inner_product(a, b)) ** 2
