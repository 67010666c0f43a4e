"""Shot-based overlap and purity estimation via the destructive swap test.

Two copies are prepared side by side; a transversal CNOT from each qubit
of the first copy onto its partner in the second, followed by a Hadamard
on the first copy, rotates every pair into the Bell basis.  Measuring
all qubits and scoring each shot as the product over pairs of
(-1)**(x_i * y_i) gives a +/-1 variable whose mean is Tr(SWAP rho (x) rho):
the squared overlap |<a|b>|^2 for two pure inputs, or Tr(rho_keep^2)
when only the kept register's pairs enter the product.

Training uses the exact statevector quantities; these estimators exist to
validate them and to account for the shot cost a sampling backend would pay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .simcore import QubitPartition, StateVector, _apply_1q, _apply_cnot_raw

_H = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ShotBudget:
    shots: int
    seed: int

    def __post_init__(self):
        if self.shots < 1:
            raise ConfigError(f"need at least one shot, got {self.shots}")


@dataclass(frozen=True)
class SwapTestResult:
    """estimate is clamped to [0, 1]; raw_mean keeps the unclamped value."""

    estimate: float
    shots_used: int
    standard_error: float
    raw_mean: float


def _bell_basis_distribution(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    joint = np.kron(a, b)
    for i in range(n):
        joint = _apply_cnot_raw(joint, 2 * n, i, n + i)
    for i in range(n):
        joint = _apply_1q(joint, 2 * n, i, _H, _H, _H, -_H)
    return np.abs(joint) ** 2


def _parity_signs(outcomes: np.ndarray, n: int, kept_qubits) -> np.ndarray:
    # qubit q of a copy sits at bit (n - 1 - q) of that copy's index
    mask = 0
    for q in kept_qubits:
        mask |= 1 << (n - 1 - q)
    x = outcomes >> n
    y = outcomes & ((1 << n) - 1)
    overlap_bits = (x & y & mask).astype(np.int64)
    table = np.array([bin(v).count("1") & 1 for v in range(1 << n)], dtype=np.int64)
    return 1.0 - 2.0 * table[overlap_bits]


def _run(dist: np.ndarray, n: int, kept_qubits, budget: ShotBudget) -> SwapTestResult:
    rng = np.random.default_rng(budget.seed)
    outcomes = rng.choice(dist.size, size=budget.shots, p=dist / dist.sum())
    vals = _parity_signs(outcomes, n, kept_qubits)
    raw = float(vals.mean())
    if budget.shots > 1:
        se = float(vals.std(ddof=1) / math.sqrt(budget.shots))
    else:
        se = 0.0
    return SwapTestResult(min(max(raw, 0.0), 1.0), budget.shots, se, raw)


def destructive_swap_test(a: StateVector, b: StateVector, budget: ShotBudget) -> SwapTestResult:
    """Estimate |<a|b>|^2 from budget.shots simulated measurement rounds."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    n = a.n_qubits
    dist = _bell_basis_distribution(a.amplitudes, b.amplitudes, n)
    return _run(dist, n, range(n), budget)


def estimate_purity(
    state: StateVector, partition: QubitPartition, keep: str, budget: ShotBudget
) -> SwapTestResult:
    """Estimate Tr(rho_keep^2) from two copies of the full state.

    The same circuit as the overlap test runs on state (x) state; only the
    kept register's pairs enter the parity product, so one set of shots
    serves either subsystem.
    """
    if partition.n_qubits != state.n_qubits:
        raise DimensionError(
            f"partition covers {partition.n_qubits} qubits, state has {state.n_qubits}"
        )
    if keep == "A":
        kept = partition.subsystem_a
    elif keep == "B":
        kept = partition.subsystem_b
    else:
        raise ConfigError(f"keep must be 'A' or 'B', got {keep!r}")
    n = state.n_qubits
    dist = _bell_basis_distribution(state.amplitudes, state.amplitudes, n)
    return _run(dist, n, kept, budget)
