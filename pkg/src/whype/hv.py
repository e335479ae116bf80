"""Binary hypervector algebra.

Hypervectors are plain 1-D ``numpy.uint8`` arrays holding 0/1 values. Stacks of
hypervectors are 2-D arrays of shape ``(count, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DIM = 512
TIE_SEED = 0x7E1E  # fixed stream for even-count majority ties


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_hypervector(v) -> np.ndarray:
    """Validate ``v`` as a binary vector and return it as ``uint8``."""
    arr = np.asarray(v)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"hypervector must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("hypervector entries must be 0 or 1")
    return arr.astype(np.uint8, copy=False)


def random_hypervector(d: int = DEFAULT_DIM, seed=None) -> np.ndarray:
    if d <= 0:
        raise ValueError(f"invalid dimension {d}")
    return _rng(seed).integers(0, 2, size=d, dtype=np.uint8)


def random_hypervectors(count: int, d: int = DEFAULT_DIM, seed=None) -> np.ndarray:
    if d <= 0:
        raise ValueError(f"invalid dimension {d}")
    return _rng(seed).integers(0, 2, size=(count, d), dtype=np.uint8)


def tie_break_vector(d: int) -> np.ndarray:
    return np.random.default_rng(TIE_SEED).integers(0, 2, size=d, dtype=np.uint8)


def _stack(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim >= 2:
        stack = vectors
    else:
        vectors = list(vectors)
        if not vectors:
            raise ValueError("cannot bundle an empty list")
        dims = {np.shape(v) for v in vectors}
        if len(dims) != 1:
            raise ValueError(f"dimension mismatch in bundle: {sorted(dims)}")
        stack = np.stack([np.asarray(v) for v in vectors])
    if stack.shape[-2] == 0:
        raise ValueError("cannot bundle an empty list")
    return stack


def majority_bundle(vectors, tie_rule: str = "vector") -> np.ndarray:
    """Element-wise majority of a list (or 2-D stack) of hypervectors.

    Arrays with more than two axes are treated as batches of stacks and
    reduced over axis -2.

    A position is 1 when strictly more than half the operands are 1. Ties only
    occur for an even operand count and are resolved by ``tie_rule``:

    * ``"vector"`` -- take the bit of a fixed, seeded tie-break vector
    * ``"zero"`` / ``"one"`` -- constant fill
    """
    stack = _stack(vectors)
    m = stack.shape[-2]
    counts = stack.sum(axis=-2, dtype=np.int64)
    out = (2 * counts > m).astype(np.uint8)
    if m % 2 == 0:
        ties = 2 * counts == m
        if ties.any():
            if tie_rule == "vector":
                out[ties] = np.broadcast_to(tie_break_vector(stack.shape[-1]), out.shape)[ties]
            elif tie_rule == "one":
                out[ties] = 1
            elif tie_rule != "zero":
                raise ValueError(f"unknown tie rule {tie_rule!r}")
    return out


@dataclass(frozen=True)
class PermutationSpec:
    """Per-slot circular rotations applied by the transmitters.

    Slot ``t`` (1-based) rotates by ``t * stride`` unless an explicit
    ``rotations`` tuple is given.
    """

    slots: int
    stride: int = 1
    rotations: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.slots < 1:
            raise ValueError("a permutation spec needs at least one slot")
        if self.rotations is not None and len(self.rotations) != self.slots:
            raise ValueError("rotations must list one step per slot")

    def rotation(self, slot: int) -> int:
        if not 1 <= slot <= self.slots:
            raise ValueError(f"slot {slot} outside [1, {self.slots}]")
        if self.rotations is not None:
            return int(self.rotations[slot - 1])
        return slot * self.stride


def rotate(v: np.ndarray, step: int) -> np.ndarray:
    return np.roll(v, step, axis=-1)


def permute(v: np.ndarray, slot: int, spec: PermutationSpec) -> np.ndarray:
    return rotate(v, spec.rotation(slot))


def inverse_permute(v: np.ndarray, slot: int, spec: PermutationSpec) -> np.ndarray:
    return rotate(v, -spec.rotation(slot))


def permute_slots(queries: np.ndarray, spec: PermutationSpec | None) -> np.ndarray:
    """Rotate row ``t`` of ``queries`` by the step of slot ``t + 1``."""
    queries = np.asarray(queries)
    if spec is None:
        return queries
    if queries.shape[0] > spec.slots:
        raise ValueError(f"{queries.shape[0]} queries but only {spec.slots} permutation slots")
    return np.stack([permute(q, t + 1, spec) for t, q in enumerate(queries)])


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    if np.shape(a) != np.shape(b):
        raise ValueError(f"dimension mismatch: {np.shape(a)} vs {np.shape(b)}")
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))


def hamming_similarity(a: np.ndarray, b: np.ndarray) -> int:
    """Number of agreeing positions, ``d - hamming_distance``."""
    return len(a) - hamming_distance(a, b)


def similarity_scores(prototypes: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Agreement counts between every query and every prototype.

    ``prototypes`` is ``(K, d)``; ``queries`` is ``(d,)`` or ``(..., d)``. The
    result has shape ``(..., K)``.
    """
    p = 2 * np.asarray(prototypes, dtype=np.int32) - 1
    q = 2 * np.asarray(queries, dtype=np.int32) - 1
    d = p.shape[-1]
    return (q @ p.T + d) // 2


def bitflip_noise(v: np.ndarray, p: float, seed=None) -> np.ndarray:
    """Flip each bit of ``v`` (any shape) independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"flip probability {p} outside [0, 1]")
    v = np.asarray(v, dtype=np.uint8)
    flips = _rng(seed).random(v.shape) < p
    return v ^ flips.astype(np.uint8)


class AssociativeMemory:
    """Prototype store answering nearest-prototype queries.

    Mirrors one in-memory similarity-search engine: at most ``capacity``
    entries of dimension ``d``. Labels are unique unless
    ``allow_duplicate_labels`` is set (used when storing individual shots).
    """

    def __init__(self, d: int = DEFAULT_DIM, capacity: int = 64, allow_duplicate_labels: bool = False):
        if d <= 0:
            raise ValueError(f"invalid dimension {d}")
        self.d = d
        self.capacity = capacity
        self.allow_duplicate_labels = allow_duplicate_labels
        self.labels: list = []
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def __len__(self):
        return len(self.labels)

    def add(self, label, prototype) -> None:
        prototype = as_hypervector(prototype)
        if prototype.shape[0] != self.d:
            raise ValueError(f"prototype has dimension {prototype.shape[0]}, memory expects {self.d}")
        if len(self.labels) >= self.capacity:
            raise ValueError(f"associative memory full ({self.capacity} entries)")
        if not self.allow_duplicate_labels and label in self.labels:
            raise ValueError(f"label {label!r} already stored")
        self.labels.append(label)
        self._rows.append(prototype)
        self._matrix = None

    @property
    def prototypes(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.stack(self._rows) if self._rows else np.zeros((0, self.d), np.uint8)
        return self._matrix

    def scores(self, q) -> np.ndarray:
        if np.shape(q)[-1] != self.d:
            raise ValueError(f"query dimension {np.shape(q)[-1]} != {self.d}")
        return similarity_scores(self.prototypes, q)

    def search(self, q) -> tuple[object, int, np.ndarray]:
        """Return ``(label, score, all_scores)``; ties go to the lowest index."""
        if not self.labels:
            raise ValueError("similarity search on an empty memory")
        scores = self.scores(q)
        best = int(np.argmax(scores))
        return self.labels[best], int(scores[best]), scores


def similarity_search(mem: AssociativeMemory, q) -> tuple[object, int, np.ndarray]:
    return mem.search(q)


# -- hypervector set files: one ``<label>,<bitstring>`` record per line --

def save_hypervectors(path, labels: Sequence, vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors, dtype=np.uint8)
    if len(labels) != len(vectors):
        raise ValueError("labels and vectors differ in length")
    lines = []
    for label, v in zip(labels, vectors):
        label = str(label)
        if "," in label or "\n" in label:
            raise ValueError(f"label {label!r} contains a separator")
        lines.append(f"{label},{''.join('1' if b else '0' for b in v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_hypervectors(path) -> tuple[list[str], np.ndarray]:
    labels, rows = [], []
    d = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        label, sep, bits = line.rpartition(",")
        if not sep or not label:
            raise ValueError(f"{path}:{lineno}: expected '<label>,<bits>'")
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"{path}:{lineno}: bitstring must contain only 0/1")
        if d is None:
            d = len(bits)
        elif len(bits) != d:
            raise ValueError(f"{path}:{lineno}: dimension {len(bits)} != {d}")
        labels.append(label)
        rows.append(np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"))
    if not rows:
        raise ValueError(f"{path}: no hypervectors")
    return labels, np.stack(rows).astype(np.uint8)


def group_by_label(labels: Iterable, vectors: np.ndarray) -> dict:
    groups: dict = {}
    for label, v in zip(labels, vectors):
        groups.setdefault(label, []).append(v)
    return {k: np.stack(v) for k, v in groups.items()}
