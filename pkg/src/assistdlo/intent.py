"""Grasp intent estimation and target selection.

Selects the intended rope point per arm using an L1 nearest-neighbor search
with spatiotemporal hysteresis, estimates the local strand tangent by PCA over
nearest neighbors, and emits a strictly top-down grasp pose whose yaw aligns
the gripper fingers perpendicular to the strand.

State is per-arm and single-writer; all operations are pure given
(cloud, state).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateNeighborhood, NoCandidates, VerticalTangent
from .geometry import Pose, Vec3, quat_from_yaw

KDTREE_MIN_POINTS = 64  # linear scan below this size; results are identical


@dataclass(frozen=True)
class IntentParams:
    step_radius: float = 0.10      # max per-frame target motion while engaged
    robot_proximity: float = 0.05  # engagement distance robot-to-previous-target
    pca_k: int = 8                 # neighbors for tangent estimation

    def __post_init__(self):
        if self.step_radius <= 0 or self.robot_proximity <= 0 or self.pca_k < 2:
            raise ValueError("invalid intent parameters")


@dataclass(frozen=True, eq=False)
class IntentState:
    """Carries the previous selection; None before any target is engaged."""

    prev_target: Vec3 | None = None


@dataclass(frozen=True, eq=False)
class GraspTarget:
    """Autonomous target pose with the tangent that defined its yaw."""

    pose: Pose
    tangent: Vec3
    source_point: Vec3


def select_target(cloud: np.ndarray, human_pos: Vec3, robot_pos: Vec3,
                  state: IntentState, params: IntentParams
                  ) -> tuple[Vec3, IntentState]:
    """Pick the intended rope point for one arm.

    The global candidate minimizes the L1 distance to the human position.
    While the robot stays within `robot_proximity` of the previous target, the
    selection is restricted to the ball of radius `step_radius` around it
    (falling back to the global candidate when that ball is empty).
    """
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if len(cloud) == 0:
        raise NoCandidates("intent selection over an empty cloud")
    l1 = np.abs(cloud - human_pos).sum(axis=1)
    global_best = int(np.argmin(l1))

    choice = global_best
    if state.prev_target is not None and \
            np.linalg.norm(robot_pos - state.prev_target) < params.robot_proximity:
        if len(cloud) > KDTREE_MIN_POINTS:
            idx = cKDTree(cloud).query_ball_point(state.prev_target,
                                                  params.step_radius)
            members = np.array(sorted(idx), dtype=np.intp)
        else:
            d = np.linalg.norm(cloud - state.prev_target, axis=1)
            members = np.flatnonzero(d <= params.step_radius)
        if len(members):
            choice = int(members[np.argmin(l1[members])])

    target = cloud[choice].copy()
    return target, IntentState(prev_target=target)


def estimate_tangent(point: Vec3, cloud: np.ndarray, k: int) -> Vec3:
    """Unit principal axis of the k Euclidean-nearest neighbors of `point`
    (the point itself included when it is a cloud member).

    Sign is canonicalized so the largest-magnitude component is positive.
    """
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if k < 2 or len(cloud) < k:
        raise ValueError(f"need k >= 2 and at least k cloud points (k={k}, n={len(cloud)})")
    d = np.linalg.norm(cloud - point, axis=1)
    order = np.lexsort((np.arange(len(cloud)), d))
    nbrs = cloud[order[:k]]
    centered = nbrs - nbrs.mean(axis=0)
    cov = centered.T @ centered / k
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] < 1e-18:
        raise DegenerateNeighborhood("all PCA neighbors are coincident")
    t = evecs[:, -1]
    major = int(np.argmax(np.abs(t)))
    if t[major] < 0:
        t = -t
    return t / np.linalg.norm(t)


def wrap_yaw(psi: float) -> float:
    """Wrap to (-pi/2, pi/2]; yaw and yaw+pi give the same finger alignment."""
    while psi > 0.5 * math.pi:
        psi -= math.pi
    while psi <= -0.5 * math.pi:
        psi += math.pi
    return psi


def grasp_pose(point: Vec3, tangent: Vec3) -> GraspTarget:
    """Top-down grasp pose at `point`: zero roll/pitch, yaw from the tangent's
    horizontal projection."""
    tangent = np.asarray(tangent, dtype=np.float64)
    if math.hypot(tangent[0], tangent[1]) < 1e-9:
        raise VerticalTangent("tangent has no horizontal projection")
    psi = wrap_yaw(math.atan2(tangent[1], tangent[0]))
    unit = tangent / np.linalg.norm(tangent)
    point = np.asarray(point, dtype=np.float64).copy()
    return GraspTarget(pose=Pose(point, quat_from_yaw(psi)),
                       tangent=unit, source_point=point)


def infer_target(cloud: np.ndarray, human_pos: Vec3, robot_pos: Vec3,
                 state: IntentState, params: IntentParams
                 ) -> tuple[GraspTarget | None, IntentState]:
    """Selection, tangent, and pose in one step.

    Returns (None, state) when no candidates exist or the tangent is vertical;
    callers treat that as assistance-off for the frame.
    """
    try:
        point, new_state = select_target(cloud, human_pos, robot_pos, state, params)
    except NoCandidates:
        return None, state
    k = min(params.pca_k, len(cloud))
    if k < 2:
        return None, new_state
    try:
        tangent = estimate_tangent(point, cloud, k)
        return grasp_pose(point, tangent), new_state
    except (DegenerateNeighborhood, VerticalTangent):
        return None, new_state
