"""Stage 2: fold a product state onto half the qubits plus one ancilla.

Given a state that Stage 1 maps (near-)exactly to phi (x) eta, the folded
form is (|0>|phi> + |1>|eta>) / sqrt(2) on one ancilla plus a single
subsystem register.  The circuit that produces it prepares the ancilla in
(c e^{i alpha}|0> + |1>) / sqrt(1 + c^2), swaps the two registers
controlled on the ancilla, and measures the second register, post-selected
onto the basis state |g> chosen to have the largest probability among
those where both factors have support.  c e^{i alpha} = <g|phi>/<g|eta>
cancels the amplitude and phase the measurement would otherwise imprint,
which is what leaves the two ancilla branches exactly balanced.

When phi and eta have disjoint supports no usable |g> exists; a recorded
cascade of ancilla-controlled Ry(pi/4) rotations spreads eta's support
until it meets phi's (`decorrelate`).  The rotations are undone during
decompression, which otherwise just projects out both branches, reforms
the product, and runs the Stage-1 circuit backwards.

Post-selection is simulated as exact amplitude projection; its success
probability is recorded per sample (both for the tuned ancilla actually
used and for a |+> ancilla) so the sampling cost a hardware run would
pay can be audited offline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import LayeredAnsatz, apply_adjoint
from .errors import (
    CorruptCompactStateError,
    DimensionError,
    NotProductError,
    OrthogonalSupportsError,
)
from .simcore import (
    QubitPartition,
    StateVector,
    apply_controlled_ry,
    apply_cswap,
    apply_ry,
    fidelity_pure,
    measure_subsystem,
    tensor,
)

SUPPORT_CUTOFF = 1e-10
MIN_FOLD_PROB = 1e-11
IDEAL_FORM_TOL = 1e-8
DECORRELATION_ANGLE = math.pi / 4


@dataclass(frozen=True)
class ProductCertificate:
    """Dominant subsystem factors of a (near-)product state."""

    phi: StateVector
    eta: StateVector
    residual: float


@dataclass(frozen=True)
class CompactState:
    """The folded state plus the provenance needed to reverse it."""

    state: StateVector
    garbage_index: int
    ratio_c: float
    phase_alpha: float
    decorrelation: tuple = ()
    postselect_prob: float = 0.0
    postselect_prob_plus: float = 0.0

    @property
    def n_qubits(self) -> int:
        return self.state.n_qubits


def split_subsystems(
    state: StateVector, partition: QubitPartition, tolerance: float = 0.02
) -> ProductCertificate:
    """Extract the dominant factors phi, eta across the bipartition.

    The factors are the leading singular vectors of the amplitude matrix,
    so fidelity(phi (x) eta, state) >= 1 - residual always holds.  Raises
    when the purity residual 2 - Tr(rho_A^2) - Tr(rho_B^2) exceeds the
    tolerance: the caller should retrain or loosen it.
    """
    if partition.n_qubits != state.n_qubits:
        raise DimensionError(
            f"partition covers {partition.n_qubits} qubits, state has {state.n_qubits}"
        )
    n = state.n_qubits
    na, nb = len(partition.subsystem_a), len(partition.subsystem_b)
    perm = partition.subsystem_a + partition.subsystem_b
    m = state.amplitudes.reshape((2,) * n).transpose(perm).reshape(1 << na, 1 << nb)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    schmidt = s**2
    residual = float(2.0 * (1.0 - np.sum(schmidt**2)))
    if residual > tolerance:
        raise NotProductError(
            f"purity residual {residual:.4g} exceeds tolerance {tolerance:.4g}"
        )
    phi = u[:, 0]
    eta = vh[0, :]
    # pin the gauge: largest phi amplitude real positive (eta absorbs the phase)
    j = int(np.argmax(np.abs(phi)))
    phase = phi[j] / abs(phi[j])
    phi = phi * np.conj(phase)
    eta = eta * phase
    return ProductCertificate(
        StateVector.from_amplitudes(phi, normalize=True),
        StateVector.from_amplitudes(eta, normalize=True),
        residual,
    )


def _eligible_outcomes(phi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Indices usable as the projection outcome.

    Both factors must clear the support cutoff there (an index held by
    one factor alone kills an ancilla branch), and the tuned-ancilla
    success probability 2 p q / (p + q) (p, q the two overlap weights)
    must clear MIN_FOLD_PROB: an index barely inside one support passes
    the first test yet lands under the post-selection floor, so allowing
    it would trade a workable outcome for a guaranteed failure.
    """
    p2 = np.abs(phi) ** 2
    q2 = np.abs(eta) ** 2
    support = (np.abs(phi) > SUPPORT_CUTOFF) & (np.abs(eta) > SUPPORT_CUTOFF)
    denom = np.where(p2 + q2 > 0, p2 + q2, 1.0)
    success = 2.0 * p2 * q2 / denom
    return support & (success > MIN_FOLD_PROB)


def select_garbage_basis(phi: StateVector, eta: StateVector):
    """Pick the measurement outcome |g> and the amplitude ratio it imprints.

    g maximizes (|<g|phi>|^2 + |<g|eta>|^2) / 2 over the eligible
    indices.  Returns (g, c, alpha) with
    c e^{i alpha} = <g|phi> / <g|eta>, c > 0.
    """
    if phi.n_qubits != eta.n_qubits:
        raise DimensionError(f"qubit counts differ: {phi.n_qubits} vs {eta.n_qubits}")
    eligible = _eligible_outcomes(phi.amplitudes, eta.amplitudes)
    if not np.any(eligible):
        raise OrthogonalSupportsError("factors share no usable basis element")
    score = (np.abs(phi.amplitudes) ** 2 + np.abs(eta.amplitudes) ** 2) / 2.0
    score = np.where(eligible, score, -1.0)
    g = int(np.argmax(score))
    ratio = phi.amplitudes[g] / eta.amplitudes[g]
    return g, float(abs(ratio)), float(np.angle(ratio))


def decorrelate(phi: StateVector, eta: StateVector):
    """Rotate eta until a usable shared basis element exists; (targets, eta').

    Applies Ry(pi/4) to eta's qubits in ascending order, recording each
    target, and stops as soon as some outcome becomes eligible.  The
    identity record () means no rotation was needed.
    """
    if _eligible_outcomes(phi.amplitudes, eta.amplitudes).any():
        return (), eta
    targets = []
    current = eta
    for t in range(eta.n_qubits):
        current = apply_ry(current, t, DECORRELATION_ANGLE)
        targets.append(t)
        if _eligible_outcomes(phi.amplitudes, current.amplitudes).any():
            return tuple(targets), current
    raise OrthogonalSupportsError(
        "could not create a usable shared basis element; eta cancels on phi's support"
    )


def compress(cert: ProductCertificate) -> CompactState:
    """Fold phi (x) eta into (|0>|phi> + |1>|eta'>) / sqrt(2) on m+1 qubits.

    Runs the ancilla-controlled-swap circuit end to end: tuned ancilla,
    register-wise controlled swaps, the recorded decorrelation rotations
    (on the surviving register for the |1> branch and on the measured
    register for the |0> branch, so the measured pair is phi vs eta'),
    then projection of the second register onto |g>.
    """
    phi, eta = cert.phi, cert.eta
    if phi.n_qubits != eta.n_qubits:
        raise DimensionError(
            "folding needs equal subsystem sizes, got "
            f"{phi.n_qubits} and {eta.n_qubits}"
        )
    m = phi.n_qubits
    targets, eta_d = decorrelate(phi, eta)
    g, c, alpha = select_garbage_basis(phi, eta_d)

    anc = StateVector.from_amplitudes(
        np.array([c * np.exp(1j * alpha), 1.0]) / math.sqrt(1.0 + c * c)
    )
    joint = tensor(anc, tensor(phi, eta))
    for i in range(m):
        joint = apply_cswap(joint, 0, 1 + i, 1 + m + i)
    for t in targets:
        joint = apply_controlled_ry(joint, 0, 1 + t, DECORRELATION_ANGLE, control_value=1)
        joint = apply_controlled_ry(joint, 0, 1 + m + t, DECORRELATION_ANGLE, control_value=0)
    outcome = measure_subsystem(joint, list(range(m + 1, 2 * m + 1)), "postselect", outcome=g)

    compact = outcome.post_state
    ideal = np.concatenate([phi.amplitudes, eta_d.amplitudes]) / math.sqrt(2.0)
    fid = fidelity_pure(compact, StateVector(m + 1, ideal))
    if fid < 1.0 - IDEAL_FORM_TOL:
        raise NotProductError(f"folded state fidelity {fid} below {1 - IDEAL_FORM_TOL}")
    p_plus = float(
        (abs(phi.amplitudes[g]) ** 2 + abs(eta_d.amplitudes[g]) ** 2) / 2.0
    )
    return CompactState(
        state=compact,
        garbage_index=g,
        ratio_c=c,
        phase_alpha=alpha,
        decorrelation=targets,
        postselect_prob=float(outcome.probability),
        postselect_prob_plus=p_plus,
    )


def decompress(compact: CompactState, ansatz: LayeredAnsatz, params) -> StateVector:
    """Reverse the fold: split the ancilla branches, undo the recorded
    rotations, reform phi (x) eta, and run the Stage-1 circuit backwards.

    Physically this consumes two copies of the folded state (one per
    ancilla projection); the simulator reads both branches directly.
    """
    amps = compact.state.amplitudes
    half = compact.state.dim // 2
    mass0 = float(np.sum(np.abs(amps[:half]) ** 2))
    mass1 = float(np.sum(np.abs(amps[half:]) ** 2))
    if mass0 <= 1e-12 or mass1 <= 1e-12:
        raise CorruptCompactStateError(
            f"ancilla branch masses {mass0:.3e}/{mass1:.3e}; both must be populated"
        )
    phi = measure_subsystem(compact.state, [0], "postselect", outcome=0).post_state
    eta = measure_subsystem(compact.state, [0], "postselect", outcome=1).post_state
    for t in reversed(compact.decorrelation):
        eta = apply_ry(eta, t, -DECORRELATION_ANGLE)
    return apply_adjoint(ansatz, params, tensor(phi, eta))


# ---------------------------------------------------------------------------
# Archive: one JSON record per folded sample, amplitudes stored exactly.
# ---------------------------------------------------------------------------


def save_archive(records, path, stage1_checkpoint: str | None = None):
    """records: iterable of (CompactState, label) pairs; label may be None."""
    with open(path, "w") as fh:
        header = {"kind": "compact-archive", "stage1_checkpoint": stage1_checkpoint}
        fh.write(json.dumps(header) + "\n")
        for index, (compact, label) in enumerate(records):
            rec = {
                "sample_index": index,
                "label": label,
                "n_qubits": compact.state.n_qubits,
                "amplitudes": [[z.real, z.imag] for z in compact.state.amplitudes],
                "garbage_index": compact.garbage_index,
                "ratio_c": compact.ratio_c,
                "phase_alpha": compact.phase_alpha,
                "decorrelation": list(compact.decorrelation),
                "postselect_prob": compact.postselect_prob,
                "postselect_prob_plus": compact.postselect_prob_plus,
            }
            fh.write(json.dumps(rec) + "\n")


def load_archive(path):
    """Returns (records, stage1_checkpoint) with records as (CompactState, label)."""
    records = []
    stage1_checkpoint = None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("kind") == "compact-archive":
                stage1_checkpoint = rec.get("stage1_checkpoint")
                continue
            amps = np.array([complex(re, im) for re, im in rec["amplitudes"]])
            compact = CompactState(
                state=StateVector(rec["n_qubits"], amps),
                garbage_index=rec["garbage_index"],
                ratio_c=rec["ratio_c"],
                phase_alpha=rec["phase_alpha"],
                decorrelation=tuple(rec["decorrelation"]),
                postselect_prob=rec["postselect_prob"],
                postselect_prob_plus=rec["postselect_prob_plus"],
            )
            records.append((compact, rec["label"]))
    return records, stage1_checkpoint
