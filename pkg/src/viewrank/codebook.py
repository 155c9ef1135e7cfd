"""Per-object embedding codebooks and cosine-similarity pose queries.

A codebook stores one unit-normalized embedding per view-grid rotation.
Queries are exact exhaustive scans (a single matrix-vector product); ties
resolve to the lowest entry index so results are reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .so3 import Rotation, ViewGrid, rotation_from_json
from .synthworld import SynthObject, render_embeddings


def cossim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two embeddings; rejects zero-norm input."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity of a zero-norm embedding is undefined")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def roll_aligned_cossim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity maximized over a shared in-plane roll, in closed form.

    Embeddings are roll-equivariant through the 2x2 pair-mixing matrix, so
    max_delta cossim(a, M(delta) b) = hypot(C, S) / (|a| |b|) with
    C = sum(a_e b_e + a_o b_o) and S = sum(a_o b_e - a_e b_o) over consecutive
    (even, odd) component pairs.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.shape[-1] % 2 != 0:
        raise ValueError("roll alignment requires an even embedding dimension")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity of a zero-norm embedding is undefined")
    ae, ao = a[0::2], a[1::2]
    be, bo = b[0::2], b[1::2]
    c = float(ae @ be + ao @ bo)
    s = float(ao @ be - ae @ bo)
    return float(np.clip(math.hypot(c, s) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class PoseHypothesis:
    class_id: str
    rotation: Rotation
    score: float


@dataclass(frozen=True)
class Codebook:
    """Immutable (rotation, unit embedding) array for one object."""

    rotations: tuple
    embeddings: np.ndarray  # (N, d), unit rows
    class_id: str
    group_id: str
    grid_meta: dict

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=float)
        if emb.shape[0] != len(self.rotations):
            raise ValueError("entry count does not match rotation count")
        emb.flags.writeable = False
        object.__setattr__(self, "embeddings", emb)

    def __len__(self) -> int:
        return len(self.rotations)

    def scores(self, z: np.ndarray) -> np.ndarray:
        zu = np.asarray(z, dtype=float)
        n = float(np.linalg.norm(zu))
        if n == 0.0:
            raise ValueError("cannot query a codebook with a zero-norm embedding")
        return self.embeddings @ (zu / n)

    def to_json(self) -> dict:
        return {
            "class_id": self.class_id,
            "group_id": self.group_id,
            "grid_meta": dict(self.grid_meta),
            "rotations": [r.to_json() for r in self.rotations],
            "embeddings": self.embeddings.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def from_json(cls, data: dict) -> "Codebook":
        return cls(
            rotations=tuple(rotation_from_json(q) for q in data["rotations"]),
            embeddings=np.array(data["embeddings"], dtype=float),
            class_id=data["class_id"],
            group_id=data["group_id"],
            grid_meta=dict(data["grid_meta"]),
        )

    @classmethod
    def load(cls, path) -> "Codebook":
        with open(path) as f:
            return cls.from_json(json.load(f))


def build_codebook(obj: SynthObject, grid: ViewGrid) -> Codebook:
    """Noise-free embeddings of every grid rotation, normalized per entry."""
    if len(grid) == 0:
        raise ValueError("view grid is empty")
    z = render_embeddings(obj, grid.quat_array())
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("object rendered a zero embedding; degenerate blob layout")
    return Codebook(
        rotations=grid.rotations,
        embeddings=z / norms,
        class_id=obj.class_id,
        group_id=obj.group_id,
        grid_meta={"n_dirs": grid.n_dirs, "n_inplane": grid.n_inplane},
    )


def estimate_pose(cb: Codebook, z: np.ndarray) -> PoseHypothesis:
    """Best codebook entry by cosine similarity; ties go to the lowest index."""
    s = cb.scores(z)
    i = int(np.argmax(s))
    return PoseHypothesis(cb.class_id, cb.rotations[i], float(np.clip(s[i], -1.0, 1.0)))


def hypotheses_for_group(codebooks, z: np.ndarray, k: int = 1) -> list:
    """Top-k entries per in-group class, merged and sorted by score descending."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not codebooks:
        raise ValueError("need at least one codebook")
    hyps = []
    for ci, cb in enumerate(codebooks):
        s = cb.scores(z)
        top = np.argsort(-s, kind="stable")[:k]
        for i in top:
            hyps.append(((-float(s[i]), ci, int(i)), PoseHypothesis(
                cb.class_id, cb.rotations[int(i)], float(np.clip(s[int(i)], -1.0, 1.0)))))
    hyps.sort(key=lambda t: t[0])
    return [h for _, h in hyps]


def identify_group(codebooks, z: np.ndarray) -> str:
    """Group of the codebook holding the globally best-scoring entry."""
    if not codebooks:
        raise ValueError("need at least one codebook")
    best_group = None
    best_score = -np.inf
    for cb in codebooks:
        s = float(np.max(cb.scores(z)))
        if s > best_score:
            best_score = s
            best_group = cb.group_id
    return best_group
