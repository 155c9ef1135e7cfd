"""Deterministic synthetic objects and their analytic view embeddings.

An object is a set of descriptor blobs on the unit sphere.  The embedding of
a view is the visibility-weighted sum of blob descriptors, rotated in pairs
by the camera's in-plane roll:

    z = M(roll) @ sum_m w(v . p_m) * descriptor_m + noise

where ``v`` is the viewing direction (object-to-camera), ``w(t) = max(0, t)^2``
is a smooth foreshortening ramp, and ``M(roll)`` applies a 2x2 rotation to
each consecutive descriptor pair.  With zero noise the embedding is an exact
pure function of (object, rotation), which makes ambiguity ground truth
computable: two objects differing only inside a spherical patch have
bit-identical embeddings whenever no differing blob is visible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .so3 import Rotation, roll_angles, view_directions

DEFAULT_N_BLOBS = 512
DEFAULT_DESCRIPTOR_DIM = 32
DEFAULT_PATCH_RADIUS = math.pi / 3.0


@dataclass(frozen=True)
class Blob:
    position: np.ndarray
    descriptor: np.ndarray


@dataclass(frozen=True)
class SynthObject:
    """Immutable blob cloud with class/group labels.

    ``positions`` is (n, 3) unit rows, ``descriptors`` is (n, d) with d even.
    """

    positions: np.ndarray
    descriptors: np.ndarray
    class_id: str
    group_id: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        desc = np.asarray(self.descriptors, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("positions must be a nonempty (n, 3) array")
        if desc.shape[0] != pos.shape[0]:
            raise ValueError("positions and descriptors disagree on blob count")
        if desc.shape[1] % 2 != 0 or desc.shape[1] < 2:
            raise ValueError("descriptor dimension must be even and >= 2")
        norms = np.linalg.norm(pos, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("blob positions must lie on the unit sphere")
        pos.flags.writeable = False
        desc.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "descriptors", desc)

    @property
    def n_blobs(self) -> int:
        return self.positions.shape[0]

    @property
    def descriptor_dim(self) -> int:
        return self.descriptors.shape[1]

    @property
    def blobs(self) -> list:
        return [Blob(p, d) for p, d in zip(self.positions, self.descriptors)]

    def to_json(self) -> dict:
        return {
            "class_id": self.class_id,
            "group_id": self.group_id,
            "meta": dict(self.meta),
            "positions": self.positions.tolist(),
            "descriptors": self.descriptors.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def from_json(cls, data: dict) -> "SynthObject":
        return cls(
            positions=np.array(data["positions"], dtype=float),
            descriptors=np.array(data["descriptors"], dtype=float),
            class_id=data["class_id"],
            group_id=data["group_id"],
            meta=dict(data.get("meta", {})),
        )

    @classmethod
    def load(cls, path) -> "SynthObject":
        with open(path) as f:
            return cls.from_json(json.load(f))


def make_ambiguous_pair(
    seed: int,
    n_blobs: int = DEFAULT_N_BLOBS,
    d: int = DEFAULT_DESCRIPTOR_DIM,
    patch_center=(1.0, 0.0, 0.0),
    patch_radius: float = DEFAULT_PATCH_RADIUS,
    group_id: str = "pair-0",
) -> tuple:
    """Twin objects identical everywhere except inside one spherical patch.

    Blob positions are shared.  Blobs whose position lies within
    ``patch_radius`` of ``patch_center`` get independently seeded descriptors
    on the second object; placement is redrawn until at least one blob falls
    inside the patch.
    """
    if n_blobs < 4:
        raise ValueError(f"n_blobs must be >= 4, got {n_blobs}")
    if not 0.0 < patch_radius < math.pi / 2.0:
        raise ValueError(f"patch_radius must be in (0, pi/2), got {patch_radius}")
    center = np.asarray(patch_center, dtype=float)
    center = center / np.linalg.norm(center)
    cos_r = math.cos(patch_radius)

    rng = np.random.default_rng(seed)
    for attempt in range(10000):
        pos = rng.normal(size=(n_blobs, 3))
        pos /= np.linalg.norm(pos, axis=1, keepdims=True)
        inside = pos @ center > cos_r
        if np.any(inside):
            break
    else:
        raise RuntimeError("no blob landed inside the patch after 10000 draws")

    desc_a = rng.normal(size=(n_blobs, d))
    rng_b = np.random.default_rng([seed, 1])
    desc_b = desc_a.copy()
    desc_b[inside] = rng_b.normal(size=(int(np.sum(inside)), d))

    meta = {
        "seed": int(seed),
        "n_blobs": int(n_blobs),
        "descriptor_dim": int(d),
        "patch_center": center.tolist(),
        "patch_radius": float(patch_radius),
        "placement_attempts": attempt + 1,
    }
    a = SynthObject(pos, desc_a, class_id="A", group_id=group_id, meta=dict(meta, twin="A"))
    b = SynthObject(pos.copy(), desc_b, class_id="B", group_id=group_id, meta=dict(meta, twin="B"))
    return a, b


def render_embeddings(obj: SynthObject, quats: np.ndarray) -> np.ndarray:
    """Noise-free embeddings for a (N, 4) quaternion array; returns (N, d)."""
    q = np.atleast_2d(np.asarray(quats, dtype=float))
    v = view_directions(q)                                   # (N, 3)
    w = np.clip(v @ obj.positions.T, 0.0, None) ** 2         # (N, n)
    s = w @ obj.descriptors                                  # (N, d)
    return _mix_pairs(s, roll_angles(q, v))


def _mix_pairs(z: np.ndarray, rolls: np.ndarray) -> np.ndarray:
    """Rotate each consecutive component pair of z by the per-row roll angle."""
    c = np.cos(rolls)[..., None]
    s = np.sin(rolls)[..., None]
    even, odd = z[..., 0::2], z[..., 1::2]
    out = np.empty_like(z)
    out[..., 0::2] = c * even - s * odd
    out[..., 1::2] = s * even + c * odd
    return out


def render_embedding(
    obj: SynthObject,
    r: Rotation,
    noise_sigma: float = 0.0,
    noise_seed=None,
) -> np.ndarray:
    """Embedding of one view, optionally with isotropic Gaussian noise."""
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be >= 0")
    z = render_embeddings(obj, r.q[None, :])[0]
    if noise_sigma > 0.0:
        gen = noise_seed if isinstance(noise_seed, np.random.Generator) else np.random.default_rng(noise_seed)
        z = z + gen.normal(0.0, noise_sigma, size=z.shape)
    return z


def differing_blobs(a: SynthObject, b: SynthObject) -> np.ndarray:
    """Boolean mask of blobs whose descriptors differ between twin objects."""
    if a.positions.shape != b.positions.shape or not np.array_equal(a.positions, b.positions):
        raise ValueError("objects do not share blob positions")
    return np.any(a.descriptors != b.descriptors, axis=1)


def patch_visible(pair, r: Rotation) -> bool:
    """True iff some differing blob has positive visibility weight from r."""
    a, b = pair
    diff = differing_blobs(a, b)
    v = r.view_direction()
    return bool(np.any((a.positions[diff] @ v) > 0.0))


def mean_embedding_norm(obj: SynthObject, n_sample_dirs: int = 256) -> float:
    """Mean noise-free embedding norm over a Fibonacci direction grid.

    Used to express noise levels relative to the signal scale.
    """
    from .so3 import build_view_grid

    grid = build_view_grid(n_sample_dirs, 1)
    z = render_embeddings(obj, grid.quat_array())
    return float(np.mean(np.linalg.norm(z, axis=1)))
