"""Bars-and-Stripes grids and their amplitude encodings.

A grid is "bars" when every column is uniformly on or off and "stripes"
when every row is; the all-dark and all-lit grids belong to both classes
and are excluded.  A side-s grid therefore contributes 2**s - 2 patterns
per class, 2**(s+1) - 4 in total.  Pixels are flattened row-major, so the
row bits become the high-order qubits of the encoded state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, EncodingError, SamplingError
from .simcore import StateVector

BARS = "bars"
STRIPES = "stripes"


def _check_side(side: int):
    if side < 2 or side & (side - 1) != 0:
        raise ConfigError(f"grid side must be a power of two >= 2, got {side}")


@dataclass(frozen=True)
class BasGrid:
    """One pattern, defined by its column (bars) or row (stripes) bitmask.

    Bit side-1-k of the mask controls column/row k, so the mask reads
    left to right (top to bottom) in binary.
    """

    side: int
    kind: str
    mask: int

    def __post_init__(self):
        _check_side(self.side)
        if self.kind not in (BARS, STRIPES):
            raise ConfigError(f"kind must be '{BARS}' or '{STRIPES}', got {self.kind!r}")
        if not 1 <= self.mask <= (1 << self.side) - 2:
            raise ConfigError(
                f"mask {self.mask} is all-dark or all-lit for side {self.side}"
            )

    @cached_property
    def pixels(self) -> np.ndarray:
        bits = np.array(
            [(self.mask >> (self.side - 1 - k)) & 1 for k in range(self.side)],
            dtype=np.uint8,
        )
        if self.kind == BARS:
            return np.tile(bits, (self.side, 1))
        return np.tile(bits[:, None], (1, self.side))


@dataclass(frozen=True)
class BasSample:
    """A labeled grid; label +1 for bars, -1 for stripes."""

    grid: BasGrid
    label: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "label", 1 if self.grid.kind == BARS else -1)

    @cached_property
    def state(self) -> StateVector:
        return encode_amplitude(self.grid)


def encode_amplitude(grid: BasGrid) -> StateVector:
    """Amplitude-encode a grid: pixel (r, c) -> index r*side + c, norm 1."""
    flat = grid.pixels.reshape(-1).astype(np.float64)
    lit = flat.sum()
    if lit == 0:
        raise EncodingError("cannot encode an all-dark grid")
    return StateVector.from_amplitudes(flat / np.sqrt(lit))


def pattern_count(side: int) -> int:
    _check_side(side)
    return 2 * ((1 << side) - 2)


def _sample_from_flat_index(side: int, index: int) -> BasSample:
    per_class = (1 << side) - 2
    if index < per_class:
        return BasSample(BasGrid(side, BARS, index + 1))
    return BasSample(BasGrid(side, STRIPES, index - per_class + 1))


def enumerate_bas(side: int) -> list[BasSample]:
    """All patterns in deterministic order: bars by ascending mask, then stripes."""
    return [_sample_from_flat_index(side, i) for i in range(pattern_count(side))]


def sample_dataset(side: int, n: int, seed: int) -> list[BasSample]:
    """Draw n distinct patterns uniformly without replacement."""
    total = pattern_count(side)
    if n > total:
        raise SamplingError(f"requested {n} samples but only {total} patterns exist")
    rng = np.random.default_rng(seed)
    indices = rng.choice(total, size=n, replace=False)
    return [_sample_from_flat_index(side, int(i)) for i in indices]


def split_train_test(samples, train_count: int, seed: int):
    """Split into (train, test), stratified by label.

    Per-label train quotas are proportional with largest-remainder
    rounding, which keeps each part's label balance as close to the
    source ratio as integer sizes allow.
    """
    samples = list(samples)
    total = len(samples)
    if not 0 < train_count < total:
        raise ConfigError(f"train_count must be in (0, {total}), got {train_count}")
    rng = np.random.default_rng(seed)

    by_label: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_label.setdefault(s.label, []).append(i)
    labels = sorted(by_label)

    quotas = {}
    remainders = []
    assigned = 0
    for lab in labels:
        exact = train_count * len(by_label[lab]) / total
        quotas[lab] = int(exact)
        assigned += quotas[lab]
        remainders.append((exact - int(exact), lab))
    for _, lab in sorted(remainders, key=lambda t: (-t[0], t[1])):
        if assigned == train_count:
            break
        quotas[lab] += 1
        assigned += 1

    train_idx, test_idx = [], []
    for lab in labels:
        pool = np.array(by_label[lab])
        rng.shuffle(pool)
        train_idx.extend(pool[: quotas[lab]].tolist())
        test_idx.extend(pool[quotas[lab] :].tolist())
    train_idx.sort()
    test_idx.sort()
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]


# ---------------------------------------------------------------------------
# Dataset files: one JSON record per line, reconstructible bit-for-bit.
# ---------------------------------------------------------------------------


def save_dataset(samples, path):
    with open(path, "w") as fh:
        for s in samples:
            rec = {
                "side": s.grid.side,
                "kind": s.grid.kind,
                "mask": s.grid.mask,
                "label": s.label,
            }
            fh.write(json.dumps(rec) + "\n")


def load_dataset(path) -> list[BasSample]:
    samples = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            sample = BasSample(BasGrid(rec["side"], rec["kind"], rec["mask"]))
            if sample.label != rec["label"]:
                raise ConfigError(f"label mismatch in record {rec}")
            samples.append(sample)
    return samples
