"""Ambiguity ranking: worst-case view similarity against the rest of a group.

For each orientation of an object, the raw ambiguity is the maximum cosine
similarity between its view embedding and the best-matching view of any other
object in the group.  The best match is found by seeding from the other
object's codebook and refining with a derivative-free cyclic coordinate
descent over the viewing-direction angles (elevation, azimuth), with a
halving step schedule; the in-plane angle is solved in closed form at every
evaluation, which the pair-mixing embedding structure makes exact.  Raw
values are then linearly normalized to [0, 1] per ranked object.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import so3
from .codebook import Codebook
from .so3 import Rotation, ViewGrid, rotation_from_json
from .synthworld import SynthObject, render_embeddings

DEFAULT_DESCENT_STEPS = 32
_MAX_INNER_STEPS = 8  # per-coordinate moves at one step size before halving

CSV_COLUMNS = [
    "rank", "similarity", "ambiguity",
    "r_a_w", "r_a_x", "r_a_y", "r_a_z",
    "r_b_w", "r_b_x", "r_b_y", "r_b_z",
    "matched_class",
]


@dataclass(frozen=True)
class MatchedPair:
    similarity: float
    r_a: Rotation
    r_b: Rotation
    matched_class: str


@dataclass(frozen=True)
class AmbiguityTable:
    """Matched pairs sorted by similarity descending, with normalized ambiguity."""

    object_class: str
    pairs: tuple
    ambiguity: np.ndarray
    grid_meta: dict

    def __post_init__(self):
        amb = np.asarray(self.ambiguity, dtype=float)
        if len(amb) != len(self.pairs):
            raise ValueError("ambiguity length does not match pair count")
        amb.flags.writeable = False
        object.__setattr__(self, "ambiguity", amb)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def raw_similarity(self) -> np.ndarray:
        return np.array([p.similarity for p in self.pairs])

    def rotations(self) -> list:
        return [p.r_a for p in self.pairs]

    def quat_array(self) -> np.ndarray:
        return np.array([p.r_a.q for p in self.pairs])

    def lookup(self, r: Rotation) -> float:
        """Ambiguity of the nearest ranked orientation (geodesic nearest grid point)."""
        return float(self.ambiguity[self.nearest_index(r)])

    def nearest_index(self, r: Rotation) -> int:
        dots = np.abs(self.quat_array() @ r.q)
        return int(np.argmax(dots))

    def lookup_batch(self, quats: np.ndarray) -> np.ndarray:
        """Vectorized nearest-orientation lookup for a (N, 4) quaternion array."""
        dots = np.abs(np.asarray(quats, dtype=float) @ self.quat_array().T)
        return self.ambiguity[np.argmax(dots, axis=1)]

    def to_json(self) -> dict:
        return {
            "object_class": self.object_class,
            "grid_meta": dict(self.grid_meta),
            "pairs": [
                {
                    "similarity": p.similarity,
                    "r_a": p.r_a.to_json(),
                    "r_b": p.r_b.to_json(),
                    "matched_class": p.matched_class,
                }
                for p in self.pairs
            ],
            "ambiguity": self.ambiguity.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def from_json(cls, data: dict) -> "AmbiguityTable":
        pairs = tuple(
            MatchedPair(
                similarity=float(p["similarity"]),
                r_a=rotation_from_json(p["r_a"]),
                r_b=rotation_from_json(p["r_b"]),
                matched_class=p["matched_class"],
            )
            for p in data["pairs"]
        )
        return cls(
            object_class=data["object_class"],
            pairs=pairs,
            ambiguity=np.array(data["ambiguity"], dtype=float),
            grid_meta=dict(data["grid_meta"]),
        )

    @classmethod
    def load(cls, path) -> "AmbiguityTable":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass(frozen=True)
class ThresholdSplit:
    """Partition of ranked orientations at an ambiguity threshold.

    ``train_rotations`` holds orientations with ambiguity strictly below the
    threshold; ``ambiguous_rotations`` is the complement.
    """

    threshold: float
    train_rotations: tuple
    ambiguous_rotations: tuple


def _direction_evaluator(target: SynthObject, z_unit: np.ndarray):
    """Best similarity over in-plane angle for a viewing direction (theta, phi).

    The embedding at a fixed direction is ``M(roll) @ s`` for the direction's
    weighted descriptor sum ``s``, so the similarity maximized over roll is
    ``hypot(C, S) / |s|`` with ``C, S`` the paired-component projections of
    the query; the argmax roll is ``atan2(S, C)``.  Returns ``(sim, roll)``.
    """
    positions = target.positions
    descriptors = target.descriptors
    ae, ao = z_unit[0::2], z_unit[1::2]

    def sim(theta: float, phi: float):
        st = math.sin(theta)
        v = np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])
        w = np.clip(positions @ v, 0.0, None) ** 2
        s = w @ descriptors
        n = float(np.linalg.norm(s))
        if n == 0.0:
            return -1.0, 0.0
        se, so = s[0::2], s[1::2]
        c = float(ae @ se + ao @ so)
        sn = float(ao @ se - ae @ so)
        return math.hypot(c, sn) / n, math.atan2(sn, c)

    return sim


def most_similar_view(
    z: np.ndarray,
    target: SynthObject,
    target_cb: Codebook,
    descent_steps: int = DEFAULT_DESCENT_STEPS,
    initial_step: float | None = None,
):
    """Most similar view of ``target`` to the embedding ``z``.

    Seeds from the best codebook entry, then runs ``descent_steps`` sweeps of
    cyclic coordinate descent over the viewing-direction angles with the step
    halving each sweep; the in-plane angle is solved in closed form at every
    evaluation.  Each sweep walks along an improving coordinate and finishes
    with a parabolic refinement, so only strict improvements are accepted and
    the similarity is non-decreasing in ``descent_steps``.
    ``descent_steps = 0`` returns the codebook seed unchanged.
    Returns ``(rotation, similarity)``.
    """
    if descent_steps < 0:
        raise ValueError("descent_steps must be >= 0")
    z = np.asarray(z, dtype=float)
    zn = float(np.linalg.norm(z))
    if zn == 0.0:
        raise ValueError("query embedding has zero norm")
    z_unit = z / zn

    scores = target_cb.embeddings @ z_unit
    i = int(np.argmax(scores))
    seed_rotation = target_cb.rotations[i]
    if descent_steps == 0:
        return seed_rotation, float(np.clip(scores[i], -1.0, 1.0))

    if initial_step is None:
        n_dirs = int(target_cb.grid_meta.get("n_dirs", len(target_cb)))
        initial_step = 2.0 * math.sqrt(4.0 * math.pi / n_dirs)

    sim = _direction_evaluator(target, z_unit)
    v0 = seed_rotation.view_direction()
    x = [math.acos(max(-1.0, min(1.0, v0[2]))), math.atan2(v0[1], v0[0])]
    best, roll = sim(*x)
    best = max(best, float(scores[i]))

    step = float(initial_step)
    for _ in range(descent_steps):
        for ci in range(2):
            xp = list(x)
            xp[ci] += step
            xm = list(x)
            xm[ci] -= step
            fp, rp = sim(*xp)
            fm, rm = sim(*xm)
            if fp > best or fm > best:
                if fp >= fm:
                    sign, x, best, roll = 1.0, xp, fp, rp
                else:
                    sign, x, best, roll = -1.0, xm, fm, rm
                for _ in range(_MAX_INNER_STEPS):
                    nxt = list(x)
                    nxt[ci] += sign * step
                    fn, rn = sim(*nxt)
                    if fn > best:
                        x, best, roll = nxt, fn, rn
                    else:
                        break
            # Parabolic refinement through (x - step, x, x + step).
            xp = list(x)
            xp[ci] += step
            xm = list(x)
            xm[ci] -= step
            fp, _ = sim(*xp)
            fm, _ = sim(*xm)
            denom = fp - 2.0 * best + fm
            if denom < 0.0:
                delta = 0.5 * step * (fm - fp) / denom
                if abs(delta) < 4.0 * step:
                    cand = list(x)
                    cand[ci] += delta
                    fc, rc = sim(*cand)
                    if fc > best:
                        x, best, roll = cand, fc, rc
        step *= 0.5

    theta, phi = x
    st = math.sin(theta)
    direction = np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])
    r_best = so3.look_at(direction, roll)
    return r_best, min(1.0, max(-1.0, best))


def normalize_ambiguity(raw) -> np.ndarray:
    """Affine map of raw values onto [0, 1]; an all-equal input maps to zeros.

    "All equal" is judged at 1e-12 so that exact-match similarities that
    differ only by float rounding still count as degenerate.
    """
    v = np.asarray(raw, dtype=float)
    if v.size < 1:
        raise ValueError("need at least one value")
    lo = float(np.min(v))
    hi = float(np.max(v))
    if hi - lo <= 1e-12:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def rank_object(
    obj: SynthObject,
    others,
    codebooks,
    coarse_grid: ViewGrid,
    descent_steps: int = DEFAULT_DESCENT_STEPS,
    threads: int = 1,
) -> AmbiguityTable:
    """Ambiguity table of ``obj`` against the other objects of its group.

    ``others`` and ``codebooks`` are parallel lists.  For every coarse-grid
    orientation the raw value is the max over other objects of
    ``most_similar_view``; the table is sorted by similarity descending and
    carries the normalized ambiguity.
    """
    if len(others) < 1:
        raise ValueError("need at least one other object in the group")
    if len(others) != len(codebooks):
        raise ValueError("others and codebooks must be parallel lists")
    if len(coarse_grid) == 0:
        raise ValueError("coarse grid is empty")

    z_all = render_embeddings(obj, coarse_grid.quat_array())
    step0 = 2.0 * coarse_grid.direction_spacing()

    def rank_one(idx: int):
        z = z_all[idx]
        best = None
        for other, cb in zip(others, codebooks):
            r_b, s = most_similar_view(z, other, cb, descent_steps, initial_step=step0)
            if best is None or s > best[0]:
                best = (s, r_b, other.class_id)
        s, r_b, cls = best
        return MatchedPair(s, coarse_grid.rotations[idx], r_b, cls)

    indices = range(len(coarse_grid))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matched = list(pool.map(rank_one, indices))
    else:
        matched = [rank_one(i) for i in indices]

    raw = np.array([p.similarity for p in matched])
    order = np.argsort(-raw, kind="stable")
    pairs = tuple(matched[i] for i in order)
    amb = normalize_ambiguity(raw[order])
    return AmbiguityTable(
        object_class=obj.class_id,
        pairs=pairs,
        ambiguity=amb,
        grid_meta={
            "coarse_dirs": coarse_grid.n_dirs,
            "coarse_inplane": coarse_grid.n_inplane,
            "descent_steps": int(descent_steps),
        },
    )


def split_by_threshold(table: AmbiguityTable, a: float) -> ThresholdSplit:
    """Orientations with ambiguity < a go to train; the rest are ambiguous."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {a}")
    train, ambiguous = [], []
    for p, v in zip(table.pairs, table.ambiguity):
        (train if v < a else ambiguous).append(p.r_a)
    return ThresholdSplit(float(a), tuple(train), tuple(ambiguous))


def best_orientation(table: AmbiguityTable) -> Rotation:
    """Orientation with minimal ambiguity; ties resolve to the lowest index."""
    if len(table) == 0:
        raise ValueError("table is empty")
    return table.pairs[int(np.argmin(table.ambiguity))].r_a


def export_sorted_pairs(table: AmbiguityTable, path) -> None:
    """CSV of the sorted matched pairs (one row per ranked orientation)."""
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rank, (p, amb) in enumerate(zip(table.pairs, table.ambiguity)):
                writer.writerow(
                    [rank, f"{p.similarity:.17g}", f"{amb:.17g}"]
                    + [f"{c:.17g}" for c in p.r_a.q]
                    + [f"{c:.17g}" for c in p.r_b.q]
                    + [p.matched_class]
                )
    except OSError as e:
        raise OSError(f"failed to write sorted pairs to {path}: {e}") from e
