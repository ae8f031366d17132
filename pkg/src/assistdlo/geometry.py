"""Shared geometric primitives: vectors, unit quaternions, poses, rigid
transforms, and pinhole camera intrinsics.

All types are immutable values and safe to share between threads. Points and
directions are plain float64 numpy arrays of shape (3,).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec3 = np.ndarray  # shape (3,), float64


def vec3(x: float, y: float, z: float) -> Vec3:
    """Build a validated 3-vector (all components finite)."""
    v = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


def as_points(points) -> np.ndarray:
    """Coerce a point list to an (N, 3) float64 array (N may be 0)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim == 1:
        arr = arr.reshape(1, 3)
    if arr.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion (scalar-first), canonicalized to w >= 0 at construction."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(n) or n < 1e-12:
            raise ValueError("cannot normalize a zero/non-finite quaternion")
        s = 1.0 / n
        if self.w < 0.0:
            s = -s
        object.__setattr__(self, "w", self.w * s)
        object.__setattr__(self, "x", self.x * s)
        object.__setattr__(self, "y", self.y * s)
        object.__setattr__(self, "z", self.z * s)

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis: Vec3, angle: float) -> "UnitQuaternion":
        ax = np.asarray(axis, dtype=np.float64)
        ax = ax / np.linalg.norm(ax)
        half = 0.5 * angle
        s = math.sin(half)
        return UnitQuaternion(math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def dot(self, other: "UnitQuaternion") -> float:
        return (self.w * other.w + self.x * other.x
                + self.y * other.y + self.z * other.z)

    def rotate(self, v: Vec3) -> Vec3:
        """Rotate a vector: v + 2w(q x v) + 2 q x (q x v)."""
        q = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(q, np.asarray(v, dtype=np.float64))
        return np.asarray(v, dtype=np.float64) + self.w * t + np.cross(q, t)

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ], dtype=np.float64)

    def angle_to(self, other: "UnitQuaternion") -> float:
        """Rotation angle between two orientations, in [0, pi]."""
        d = min(1.0, abs(self.dot(other)))
        return 2.0 * math.acos(d)


def quat_from_yaw(psi: float) -> UnitQuaternion:
    """Rotation of psi about world z; roll = pitch = 0."""
    return UnitQuaternion(math.cos(0.5 * psi), 0.0, 0.0, math.sin(0.5 * psi))


def slerp(a: UnitQuaternion, b: UnitQuaternion, t: float) -> UnitQuaternion:
    """Constant-angular-velocity interpolation along the shorter arc.

    Flips b's representative when dot(a, b) < 0 so the blend never spins the
    long way; falls back to normalized linear interpolation when the inputs
    are nearly parallel (dot > 1 - 1e-6).
    """
    qa = a.as_array()
    qb = b.as_array()
    d = float(np.dot(qa, qb))
    if d < 0.0:
        qb = -qb
        d = -d
    if d > 1.0 - 1e-6:
        q = (1.0 - t) * qa + t * qb
        return UnitQuaternion(*q)
    theta = math.acos(min(1.0, d))
    s = math.sin(theta)
    wa = math.sin((1.0 - t) * theta) / s
    wb = math.sin(t * theta) / s
    q = wa * qa + wb * qb
    return UnitQuaternion(*q)


@dataclass(frozen=True, eq=False)
class Pose:
    """Position plus orientation; the command/state currency of the system."""

    position: Vec3
    orientation: UnitQuaternion

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=np.float64).reshape(3))
        if not np.all(np.isfinite(self.position)):
            raise ValueError("non-finite pose position")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), UnitQuaternion.identity())


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """SE(3) transform: p -> R p + t, with R orthonormal and det(R) = +1."""

    rotation: np.ndarray
    translation: Vec3

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("non-finite transform")
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0.0:
            raise ValueError("rotation has negative determinant")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_quat_translation(q: UnitQuaternion, t: Vec3) -> "RigidTransform":
        return RigidTransform(q.to_matrix(), t)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self o other: apply `other` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)


def transform_point(transform: RigidTransform, p: Vec3) -> Vec3:
    """Map a point: R p + t."""
    return transform.rotation @ np.asarray(p, dtype=np.float64) + transform.translation


def transform_points(transform: RigidTransform, points: np.ndarray) -> np.ndarray:
    """Map an (N, 3) array of points through R p + t."""
    pts = as_points(points)
    return pts @ transform.rotation.T + transform.translation


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; fx, fy, cx, cy in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")


def project_point(intrinsics: CameraIntrinsics, p: Vec3) -> tuple[float, float]:
    """Forward pinhole projection of a camera-frame point with z > 0."""
    p = np.asarray(p, dtype=np.float64)
    if p[2] <= 0.0:
        raise ValueError("point is behind the camera")
    return (intrinsics.fx * p[0] / p[2] + intrinsics.cx,
            intrinsics.fy * p[1] / p[2] + intrinsics.cy)


def look_at(eye: Vec3, target: Vec3, up: Vec3 | None = None) -> RigidTransform:
    """Camera-to-world transform for a camera at `eye` looking at `target`.

    Camera convention: +z optical axis, +x right, +y down.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if up is None:
        up = np.array([0.0, 0.0, 1.0])
    fwd = target - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, up)
    n = np.linalg.norm(right)
    if n < 1e-9:
        right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
        n = np.linalg.norm(right)
    right /= n
    down = np.cross(fwd, right)
    r = np.column_stack([right, down, fwd])
    return RigidTransform(r, eye)
