"""Seed derivation and small sampling helpers.

Every random choice in the package flows through a ``random.Random`` instance
derived here. Derivation hashes the master seed together with a label path
(sample index, re-draw counter, ...), so independent streams can be created
for concurrent work without sharing state: identical (seed, labels) always
yields an identical stream, regardless of scheduling.
"""

from __future__ import annotations

import hashlib
import random
from typing import Sequence


def derive_rng(seed: int, *labels: int | str) -> random.Random:
    """Return an independent RNG for (seed, labels), stable across processes."""
    h = hashlib.sha256()
    h.update(b"kgcert.rand")
    h.update(repr(seed).encode("utf-8"))
    for label in labels:
        h.update(b"/")
        h.update(repr(label).encode("utf-8"))
    return random.Random(int.from_bytes(h.digest(), "big"))


def choice(rng: random.Random, seq: Sequence):
    """Uniform choice; explicit helper so every call site is seeded."""
    if not seq:
        raise IndexError("choice from empty sequence")
    return seq[rng.randrange(len(seq))]


def weighted_choice(rng: random.Random, seq: Sequence, weights: Sequence[float]):
    if len(seq) != len(weights):
        raise ValueError("weights length mismatch")
    return rng.choices(seq, weights=weights, k=1)[0]


def shuffled(rng: random.Random, seq: Sequence) -> list:
    out = list(seq)
    rng.shuffle(out)
    return out
