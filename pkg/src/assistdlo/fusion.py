"""Multi-view fusion: transform per-camera traces into the task frame, drop
stale observations, union them, and regularize at two voxel resolutions.

The coarse set feeds intent and control; the fine set feeds visualization.
States are immutable snapshots exchanged single-writer / multi-reader.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, as_points, transform_points

TASK_FRAME = "task"

DEFAULT_TIMEOUT = 1.0       # seconds; observations older than this are dropped
DEFAULT_COARSE_VOXEL = 0.01  # meters, control resolution
DEFAULT_FINE_VOXEL = 0.005   # meters, visualization resolution


@dataclass(frozen=True, eq=False)
class TimedPointCloud:
    """Timestamped point set in a declared frame."""

    points: np.ndarray   # (N, 3)
    frame_id: str
    timestamp: float     # seconds, monotonic clock

    def __post_init__(self):
        object.__setattr__(self, "points", as_points(self.points))
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("non-finite points")


@dataclass(frozen=True, eq=False)
class DloState:
    """Dual-resolution rope state; empty state means the rope is unobserved."""

    coarse: np.ndarray
    fine: np.ndarray
    timestamp: float

    def __post_init__(self):
        object.__setattr__(self, "coarse", as_points(self.coarse))
        object.__setattr__(self, "fine", as_points(self.fine))

    @property
    def empty(self) -> bool:
        return len(self.coarse) == 0

    def to_text(self) -> str:
        """Line-oriented form: a header line, then one "x y z" per point."""
        lines = [f"# timestamp={self.timestamp!r} "
                 f"coarse={len(self.coarse)} fine={len(self.fine)}"]
        for p in self.coarse:
            lines.append(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
        for p in self.fine:
            lines.append(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "timestamp": self.timestamp,
            "coarse": self.coarse.tolist(),
            "fine": self.fine.tolist(),
        })

    @staticmethod
    def from_text(text: str) -> "DloState":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].lstrip("# ").split()
        meta = dict(kv.split("=") for kv in header)
        ts = float(meta["timestamp"])
        nc = int(meta["coarse"])
        pts = np.array([[float(x) for x in ln.split()] for ln in lines[1:]],
                       dtype=np.float64).reshape(-1, 3)
        return DloState(pts[:nc], pts[nc:], ts)


def to_task_frame(cloud: TimedPointCloud, extrinsic: RigidTransform) -> TimedPointCloud:
    """Map a camera-frame cloud through the camera-to-task transform."""
    return TimedPointCloud(transform_points(extrinsic, cloud.points),
                           TASK_FRAME, cloud.timestamp)


def fuse(left: TimedPointCloud | None, right: TimedPointCloud | None,
         now: float, timeout: float = DEFAULT_TIMEOUT) -> np.ndarray:
    """Union of all task-frame clouds no older than `timeout` seconds."""
    fresh = [c.points for c in (left, right)
             if c is not None and (now - c.timestamp) <= timeout]
    if not fresh:
        return np.zeros((0, 3))
    return np.vstack(fresh)


def voxel_downsample(points: np.ndarray, voxel: float) -> np.ndarray:
    """One centroid per occupied voxel, ordered by ascending voxel key
    (z-major, then y, then x). The grid is anchored at the origin; boundary
    points are assigned by floor(coordinate / voxel)."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    pts = as_points(points)
    if len(pts) == 0:
        return pts
    keys = np.floor(pts / voxel).astype(np.int64)
    order = np.lexsort((keys[:, 0], keys[:, 1], keys[:, 2]))
    keys = keys[order]
    pts = pts[order]
    boundary = np.any(np.diff(keys, axis=0) != 0, axis=1)
    starts = np.concatenate([[0], np.flatnonzero(boundary) + 1])
    counts = np.diff(np.concatenate([starts, [len(pts)]]))
    sums = np.add.reduceat(pts, starts, axis=0)
    return sums / counts[:, None]


def build_state(left: TimedPointCloud | None, right: TimedPointCloud | None,
                now: float,
                coarse_voxel: float = DEFAULT_COARSE_VOXEL,
                fine_voxel: float = DEFAULT_FINE_VOXEL,
                timeout: float = DEFAULT_TIMEOUT) -> DloState:
    """Fuse fresh clouds and regularize at both resolutions."""
    if coarse_voxel < fine_voxel:
        raise ValueError("coarse voxel must be >= fine voxel")
    fused = fuse(left, right, now, timeout)
    return DloState(voxel_downsample(fused, coarse_voxel),
                    voxel_downsample(fused, fine_voxel),
                    now)
