"""Rotation arithmetic and quasi-uniform view grids over SO(3).

Conventions used throughout the package:

- Quaternions are ``(w, x, y, z)``, unit norm, canonicalized so that the
  first nonzero component is positive (in practice ``w >= 0``).  ``q`` and
  ``-q`` denote the same rotation and compare equal.
- The canonical camera view axis is ``+z``.  A view rotation maps ``+z``
  to the direction from the object center toward the camera; the residual
  rotation about that axis is the in-plane roll.
- Euler angles are intrinsic Z-Y-X: ``R = Rz(alpha) @ Ry(beta) @ Rx(gamma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VIEW_AXIS = np.array([0.0, 0.0, 1.0])
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

_UNIT_TOL = 1e-9


class Rotation:
    """A rotation stored as a canonicalized unit quaternion ``(w, x, y, z)``."""

    __slots__ = ("q",)

    def __init__(self, w: float, x: float, y: float, z: float):
        q = np.array([w, x, y, z], dtype=float)
        n = math.sqrt(float(q @ q))
        if not math.isfinite(n) or n < 1e-12:
            raise ValueError("quaternion norm is zero or non-finite")
        q /= n
        # Double cover collapsed: make the first nonzero component positive.
        for c in q:
            if c != 0.0:
                if c < 0.0:
                    q = -q
                break
        self.q = q
        self.q.flags.writeable = False

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_quat(cls, q) -> "Rotation":
        w, x, y, z = (float(v) for v in q)
        return cls(w, x, y, z)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        a = np.asarray(axis, dtype=float)
        n = math.sqrt(float(a @ a))
        if n < 1e-12:
            raise ValueError("axis has zero norm")
        s = math.sin(angle / 2.0) / n
        return cls(math.cos(angle / 2.0), a[0] * s, a[1] * s, a[2] * s)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        """Composition: ``(a @ b)`` applies ``b`` first, then ``a``."""
        return Rotation.from_quat(quat_mul(self.q, other.q))

    def inverse(self) -> "Rotation":
        w, x, y, z = self.q
        return Rotation(w, -x, -y, -z)

    def apply(self, v) -> np.ndarray:
        """Rotate a 3-vector."""
        w, x, y, z = self.q
        u = np.array([x, y, z])
        v = np.asarray(v, dtype=float)
        return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def view_direction(self) -> np.ndarray:
        """Image of the canonical view axis (+z) under this rotation."""
        w, x, y, z = self.q
        return np.array([2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)])

    def roll_angle(self) -> float:
        """In-plane roll: angle of ``look_at(view_direction)^-1 @ self`` about z."""
        v = self.view_direction()
        rel = quat_mul(quat_conj(_look_at_quat(v)), self.q)
        return 2.0 * math.atan2(rel[3], rel[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Rotation):
            return NotImplemented
        return bool(np.array_equal(self.q, other.q))

    def __hash__(self) -> int:
        return hash(self.q.tobytes())

    def isclose(self, other: "Rotation", tol: float = 1e-9) -> bool:
        return geodesic_distance(self, other) <= tol

    def to_json(self) -> list:
        return [float(f"{c:.17g}") for c in self.q]

    def __repr__(self) -> str:
        w, x, y, z = self.q
        return f"Rotation({w:.6g}, {x:.6g}, {y:.6g}, {z:.6g})"


@dataclass(frozen=True)
class SphericalDirection:
    """Direction on the unit sphere; ``theta`` elevation in [0, pi], ``phi`` azimuth in [0, 2pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta out of [0, pi]: {self.theta}")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ValueError(f"phi out of [0, 2pi): {self.phi}")

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


@dataclass(frozen=True)
class ViewGrid:
    """Ordered rotations: one block of ``n_inplane`` rolls per sphere direction."""

    rotations: tuple
    directions: tuple
    n_dirs: int
    n_inplane: int

    def __len__(self) -> int:
        return len(self.rotations)

    def quat_array(self) -> np.ndarray:
        return np.array([r.q for r in self.rotations])

    def direction_spacing(self) -> float:
        """Expected angular spacing of the direction lattice, sqrt(4*pi/n)."""
        return math.sqrt(4.0 * math.pi / self.n_dirs)


def fibonacci_directions(n: int) -> list:
    """Quasi-uniform directions from the golden-angle Fibonacci lattice.

    Uses ``z_k = 1 - 2(k + 0.5)/n`` with azimuth ``k * golden_angle``; the
    single-point lattice degenerates to the pole.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return [SphericalDirection(0.0, 0.0)]
    out = []
    for k in range(n):
        z = 1.0 - 2.0 * (k + 0.5) / n
        theta = math.acos(max(-1.0, min(1.0, z)))
        phi = math.fmod(k * GOLDEN_ANGLE, 2.0 * math.pi)
        if phi < 0.0:
            phi += 2.0 * math.pi
        out.append(SphericalDirection(theta, phi))
    return out


def look_at(direction, roll: float = 0.0) -> Rotation:
    """Rotation mapping the view axis (+z) to ``direction``, then rolled about it.

    The base alignment is the geodesic rotation from +z; the roll is applied
    about the view axis *before* the alignment, so the viewed direction is
    unchanged while the image rotates in-plane.
    """
    d = np.asarray(direction, dtype=float)
    n = math.sqrt(float(d @ d))
    if n < 1e-12:
        raise ValueError("direction has zero norm")
    d = d / n
    base = Rotation.from_quat(_look_at_quat(d))
    if roll == 0.0:
        return base
    return base @ Rotation(math.cos(roll / 2.0), 0.0, 0.0, math.sin(roll / 2.0))


def build_view_grid(n_dirs: int, n_inplane: int) -> ViewGrid:
    """Fibonacci directions x uniform in-plane rolls, direction-major order."""
    if n_dirs < 1 or n_inplane < 1:
        raise ValueError(f"counts must be >= 1, got ({n_dirs}, {n_inplane})")
    dirs = fibonacci_directions(n_dirs)
    rotations = []
    for sd in dirs:
        d = sd.unit_vector()
        for j in range(n_inplane):
            rotations.append(look_at(d, 2.0 * math.pi * j / n_inplane))
    return ViewGrid(tuple(rotations), tuple(dirs), n_dirs, n_inplane)


def geodesic_distance(a: Rotation, b: Rotation) -> float:
    """Angle of ``a^-1 b`` in [0, pi]; zero iff a == b up to quaternion sign."""
    qa, qb = a.q, b.q
    if float(qa @ qb) < 0.0:
        qb = -qb
    # 4*asin(|qa - qb|/2) is accurate near zero where acos of the dot is not.
    half_chord = 0.5 * math.sqrt(float((qa - qb) @ (qa - qb)))
    return 4.0 * math.asin(max(-1.0, min(1.0, half_chord)))


def from_euler(alpha: float, beta: float, gamma: float) -> Rotation:
    """Intrinsic Z-Y-X Euler angles to a rotation."""
    ca, sa = math.cos(alpha / 2.0), math.sin(alpha / 2.0)
    cb, sb = math.cos(beta / 2.0), math.sin(beta / 2.0)
    cg, sg = math.cos(gamma / 2.0), math.sin(gamma / 2.0)
    # qz(alpha) * qy(beta) * qx(gamma), expanded.
    w = ca * cb * cg + sa * sb * sg
    x = ca * cb * sg - sa * sb * cg
    y = ca * sb * cg + sa * cb * sg
    z = sa * cb * cg - ca * sb * sg
    return Rotation(w, x, y, z)


def to_euler(r: Rotation) -> tuple:
    """Rotation to intrinsic Z-Y-X Euler angles.

    At gimbal lock (|beta| = pi/2) the decomposition is not unique; the
    canonical representative with gamma = 0 is returned.
    """
    m = r.to_matrix()
    sb = -m[2, 0]
    if abs(sb) < 1.0 - 1e-10:
        beta = math.asin(max(-1.0, min(1.0, sb)))
        alpha = math.atan2(m[1, 0], m[0, 0])
        gamma = math.atan2(m[2, 1], m[2, 2])
    else:
        beta = math.copysign(math.pi / 2.0, sb)
        alpha = math.atan2(-m[0, 1], m[1, 1])
        gamma = 0.0
    return (alpha, beta, gamma)


def rotation_to_json(r: Rotation) -> list:
    return r.to_json()


def rotation_from_json(data) -> Rotation:
    return Rotation.from_quat(data)


# ---------------------------------------------------------------------------
# Vectorized quaternion helpers on (..., 4) arrays, used by the hot paths.

def quat_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    w1, x1, y1, z1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    w2, x2, y2, z2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def view_directions(quats: np.ndarray) -> np.ndarray:
    """Images of the view axis (+z) for a (..., 4) quaternion array."""
    q = np.asarray(quats, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)], axis=-1
    )


def roll_angles(quats: np.ndarray, dirs: np.ndarray | None = None) -> np.ndarray:
    """In-plane roll of each rotation in a (..., 4) quaternion array."""
    q = np.asarray(quats, dtype=float)
    v = view_directions(q) if dirs is None else np.asarray(dirs, dtype=float)
    la = _look_at_quats(v)
    rel = quat_mul(quat_conj(la), q)
    return 2.0 * np.arctan2(rel[..., 3], rel[..., 0])


def _look_at_quat(d: np.ndarray) -> np.ndarray:
    """Unnormalized-input geodesic alignment quaternion from +z to unit d."""
    w = 1.0 + d[2]
    if w < 1e-12:
        return np.array([0.0, 1.0, 0.0, 0.0])  # half turn about x for d = -z
    q = np.array([w, -d[1], d[0], 0.0])
    return q / math.sqrt(float(q @ q))


def _look_at_quats(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    w = 1.0 + d[..., 2]
    q = np.stack([w, -d[..., 1], d[..., 0], np.zeros_like(w)], axis=-1)
    degenerate = w < 1e-12
    if np.any(degenerate):
        q[degenerate] = np.array([0.0, 1.0, 0.0, 0.0])
    n = np.sqrt(np.sum(q * q, axis=-1, keepdims=True))
    return q / n


def random_rotation(rng: np.random.Generator) -> Rotation:
    """Uniform random rotation (normalized 4-d Gaussian quaternion)."""
    q = rng.normal(size=4)
    return Rotation.from_quat(q)
