"""Deterministic RNG derivation: one root seed, labeled child streams.

Every stochastic component draws from ``rng(root, *labels)`` where the labels
name the component and, where applicable, an index (e.g. ``("episode", 17,
"obs", 3)``).  Parallel and serial execution therefore produce identical
streams.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_entropy(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def seed_sequence(root: int, *labels) -> np.random.SeedSequence:
    entropy = [int(root) & 0xFFFFFFFFFFFFFFFF] + [_label_entropy(l) for l in labels]
    return np.random.SeedSequence(entropy)


def rng(root: int, *labels) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(root, *labels))
