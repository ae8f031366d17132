"""Position-based-dynamics rope on a table with kinematic grippers.

Minimal model: stretch constraints between neighboring particles, table
contact, tangential contact damping, a vertical finger capsule per gripper,
and rigid attachment of a grasped particle to the gripper frame. Sufficient to
quantify whether a commanded approach sweeps ungrasped rope strands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import SimDiverged
from .geometry import (CameraIntrinsics, Pose, RigidTransform, Vec3,
                       transform_points)
from .imaging import BinaryMask, DepthMap


@dataclass(frozen=True)
class RopePreset:
    """Physical rope properties; lengths in meters, mass in kilograms."""

    name: str
    length: float
    mass: float
    diameter: float
    linear_density: float        # kg/m
    flexural_rigidity: float     # N*m^2

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter


ROPE_PRESETS = {
    "blue": RopePreset("blue", 3.91, 0.140, 0.0127, 0.0358, 0.0235),
    "green": RopePreset("green", 2.21, 0.085, 0.0121, 0.0385, 0.0170),
    "red": RopePreset("red", 3.76, 0.138, 0.0114, 0.0367, 0.0390),
    "orange": RopePreset("orange", 2.81, 0.115, 0.0117, 0.0409, 0.0465),
}


@dataclass(frozen=True)
class SimConfig:
    gravity: float = 9.81
    table_z: float = 0.0
    substeps: int = 3
    constraint_iters: int = 10
    friction_coeff: float = 0.5
    dt: float = 0.01
    bend_stiffness: float = 0.0   # optional second-neighbor constraint weight

    def __post_init__(self):
        if self.substeps < 1 or self.constraint_iters < 1 or self.dt <= 0:
            raise ValueError("invalid simulation configuration")


@dataclass(frozen=True)
class GripperSpec:
    """Kinematic gripper geometry: a vertical finger capsule below the wrist.

    The collision surface reaches exactly down to the jaw center, so a
    commanded wrist at (jaw height + finger_length) closes around a strand
    without plowing it.
    """

    finger_length: float = 0.086   # wrist to jaw center
    capsule_radius: float = 0.015
    attach_slack: float = 0.005    # attach when ||p - jaw|| <= rope radius + slack

    def jaw_center(self, pose: Pose) -> Vec3:
        return pose.position - np.array([0.0, 0.0, self.finger_length])


@dataclass(frozen=True, eq=False)
class Attachment:
    particle: int
    local_offset: np.ndarray  # offset in the gripper frame at grasp time


@dataclass(frozen=True, eq=False)
class RopeState:
    """Particle chain; attachments mirror the per-gripper grasped indices."""

    particles: np.ndarray            # (N, 3)
    velocities: np.ndarray           # (N, 3)
    rest_length: float
    radius: float
    attachments: tuple = (None, None)

    def __post_init__(self):
        object.__setattr__(self, "particles",
                           np.asarray(self.particles, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "velocities",
                           np.asarray(self.velocities, dtype=np.float64).reshape(-1, 3))

    @staticmethod
    def from_positions(positions: np.ndarray, rest_length: float,
                       radius: float) -> "RopeState":
        pos = np.asarray(positions, dtype=np.float64)
        return RopeState(pos, np.zeros_like(pos), rest_length, radius)

    @property
    def grasped_index(self) -> tuple:
        return tuple(a.particle if a is not None else None for a in self.attachments)

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.particles, axis=0), axis=1)


def _conjugate_rotate(pose: Pose, v: Vec3) -> Vec3:
    q = pose.orientation
    from .geometry import UnitQuaternion
    return UnitQuaternion(q.w, -q.x, -q.y, -q.z).rotate(v)


def _capsule_pushout(x: np.ndarray, pose: Pose, spec: GripperSpec,
                     rope_radius: float, skip: int | None) -> None:
    """Project particles out of the finger capsule, in place."""
    top = pose.position
    bottom = top - np.array([0.0, 0.0, spec.finger_length - spec.capsule_radius])
    axis = bottom - top
    seg_len2 = float(axis @ axis)
    rel = x - top
    t = np.clip((rel @ axis) / seg_len2, 0.0, 1.0) if seg_len2 > 0 else np.zeros(len(x))
    closest = top + t[:, None] * axis
    delta = x - closest
    dist = np.linalg.norm(delta, axis=1)
    min_dist = spec.capsule_radius + rope_radius
    hit = dist < min_dist
    if skip is not None:
        hit[skip] = False
    if not np.any(hit):
        return
    d = dist[hit]
    dirs = np.empty((int(hit.sum()), 3))
    ok = d > 1e-9
    dirs[ok] = delta[hit][ok] / d[ok, None]
    dirs[~ok] = np.array([1.0, 0.0, 0.0])  # particle exactly on the axis
    x[hit] = closest[hit] + dirs * min_dist


def step(rope: RopeState, grippers: list[tuple[Pose, bool]], cfg: SimConfig,
         spec: GripperSpec = GripperSpec()) -> RopeState:
    """Advance one control period: semi-implicit integration plus constraint
    projection, with gripper collision, attachment, and table contact.

    `grippers` holds (pose, jaw_open) per arm. A closing jaw attaches the
    nearest particle within the attach distance; an open jaw detaches.
    """
    x = rope.particles.copy()
    v = rope.velocities.copy()
    n = len(x)
    attachments = list(rope.attachments)
    if len(attachments) < len(grippers):
        attachments += [None] * (len(grippers) - len(attachments))

    for gi, (pose, jaw_open) in enumerate(grippers):
        if jaw_open:
            attachments[gi] = None
        elif attachments[gi] is None:
            jaw = spec.jaw_center(pose)
            d = np.linalg.norm(x - jaw, axis=1)
            cand = int(np.argmin(d))
            if d[cand] <= rope.radius + spec.attach_slack:
                attachments[gi] = Attachment(cand, _conjugate_rotate(pose, x[cand] - jaw))

    inv_mass = np.ones(n)
    weld_pos = {}
    for gi, att in enumerate(attachments):
        if att is not None:
            pose = grippers[gi][0]
            inv_mass[att.particle] = 0.0
            weld_pos[att.particle] = (spec.jaw_center(pose)
                                      + pose.orientation.rotate(att.local_offset))

    dt_s = cfg.dt / cfg.substeps
    rest = rope.rest_length
    floor = cfg.table_z + rope.radius
    even = np.arange(0, n - 1, 2)
    odd = np.arange(1, n - 1, 2)

    for _ in range(cfg.substeps):
        x_prev = x.copy()
        v[:, 2] -= cfg.gravity * dt_s
        x = x + v * dt_s
        for p, wp in weld_pos.items():
            x[p] = wp

        for _ in range(cfg.constraint_iters):
            for idx in (even, odd):
                if len(idx) == 0:
                    continue
                d = x[idx + 1] - x[idx]
                length = np.linalg.norm(d, axis=1)
                length = np.where(length < 1e-12, 1e-12, length)
                w0 = inv_mass[idx]
                w1 = inv_mass[idx + 1]
                wsum = w0 + w1
                corr = ((length - rest) / (length * np.where(wsum > 0, wsum, 1.0)))[:, None] * d
                x[idx] += np.where(wsum[:, None] > 0, w0[:, None] * corr, 0.0)
                x[idx + 1] -= np.where(wsum[:, None] > 0, w1[:, None] * corr, 0.0)
            if cfg.bend_stiffness > 0.0 and n > 2:
                i = np.arange(n - 2)
                d = x[i + 2] - x[i]
                length = np.linalg.norm(d, axis=1)
                target = 2.0 * rest
                sel = length < target
                if np.any(sel):
                    ii = i[sel]
                    dd = d[sel] / length[sel, None]
                    corr = cfg.bend_stiffness * 0.5 * (target - length[sel])[:, None] * dd
                    x[ii] -= corr * (inv_mass[ii] > 0)[:, None]
                    x[ii + 2] += corr * (inv_mass[ii + 2] > 0)[:, None]

        np.maximum(x[:, 2], floor, out=x[:, 2])
        for gi, (pose, _) in enumerate(grippers):
            skip = attachments[gi].particle if attachments[gi] is not None else None
            _capsule_pushout(x, pose, spec, rope.radius, skip)
        np.maximum(x[:, 2], floor, out=x[:, 2])
        for p, wp in weld_pos.items():
            x[p] = wp

        contact = x[:, 2] <= floor + 1e-9
        if np.any(contact):
            damp = 1.0 - cfg.friction_coeff
            x[contact, 0] = x_prev[contact, 0] + (x[contact, 0] - x_prev[contact, 0]) * damp
            x[contact, 1] = x_prev[contact, 1] + (x[contact, 1] - x_prev[contact, 1]) * damp
        v = (x - x_prev) / dt_s

    if not np.all(np.isfinite(x)):
        raise SimDiverged("rope particles became non-finite")
    return replace(rope, particles=x, velocities=v, attachments=tuple(attachments))


def pre_grasp_displacement(before: RopeState, after: RopeState,
                           exclude_near: Vec3 | None = None,
                           radius: float = 0.0) -> float:
    """Max particle displacement, ignoring particles that started within
    `radius` of `exclude_near` (the intended grasp region)."""
    if len(before.particles) != len(after.particles):
        raise ValueError("particle counts differ")
    moved = np.linalg.norm(after.particles - before.particles, axis=1)
    if exclude_near is not None and radius > 0:
        keep = np.linalg.norm(before.particles - exclude_near, axis=1) > radius
        moved = moved[keep]
    return float(moved.max()) if len(moved) else 0.0


def _splat_spheres(zbuf: np.ndarray, centers: np.ndarray, radius: float,
                   intr: CameraIntrinsics) -> None:
    """Rasterize many equal-radius spheres at once: per-sphere pixel windows
    of a shared size, intersected analytically (ray p = t*(dx, dy, 1))."""
    front = centers[:, 2] > 1e-6
    centers = centers[front]
    if len(centers) == 0:
        return
    cx_, cy_, cz = centers[:, 0], centers[:, 1], centers[:, 2]
    u0 = intr.fx * cx_ / cz + intr.cx
    v0 = intr.fy * cy_ / cz + intr.cy
    half = int(math.ceil(max(intr.fx, intr.fy) * radius / cz.min())) + 2
    side = 2 * half + 1
    ua = np.floor(u0).astype(np.intp) - half
    va = np.floor(v0).astype(np.intp) - half
    offs = np.arange(side)
    us = ua[:, None, None] + offs[None, None, :]
    vs = va[:, None, None] + offs[None, :, None]
    inside = (us >= 0) & (us < intr.width) & (vs >= 0) & (vs < intr.height)
    dx = (us - intr.cx) / intr.fx
    dy = (vs - intr.cy) / intr.fy
    dd = dx**2 + dy**2 + 1.0
    dc = (dx * cx_[:, None, None] + dy * cy_[:, None, None]
          + cz[:, None, None])
    disc = dc**2 - dd * ((cx_**2 + cy_**2 + cz**2 - radius**2)[:, None, None])
    hit = (disc >= 0.0) & inside
    if not np.any(hit):
        return
    t = np.where(hit, (dc - np.sqrt(np.where(hit, disc, 0.0))) / dd, np.inf)
    t = np.where(t > 1e-6, t, np.inf)
    flat_idx = (np.clip(vs, 0, intr.height - 1) * intr.width
                + np.clip(us, 0, intr.width - 1))
    sel = np.isfinite(t)
    np.minimum.at(zbuf.ravel(), flat_idx[sel], t[sel])


def render_views(rope: RopeState,
                 cameras: list[tuple[CameraIntrinsics, RigidTransform]]
                 ) -> list[tuple[BinaryMask, DepthMap]]:
    """Rasterize the rope into each camera as a chain of spheres along the
    centerline (sphere spacing <= radius/2, indistinguishable from a capsule
    at pixel scale). Depth is nearest-surface, quantized to millimeters;
    a rope fully behind a camera yields an empty mask.
    """
    pts = rope.particles
    samples = [pts[0]] if len(pts) else []
    for a, b in zip(pts[:-1], pts[1:]):
        seg = np.linalg.norm(b - a)
        nsub = max(1, int(math.ceil(seg / (rope.radius * 0.5))))
        for k in range(1, nsub + 1):
            samples.append(a + (b - a) * (k / nsub))
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 3)

    out = []
    for intr, extrinsic in cameras:
        world_to_cam = extrinsic.inverse()
        cam_pts = transform_points(world_to_cam, samples) if len(samples) else samples
        zbuf = np.full((intr.height, intr.width), np.inf)
        if len(cam_pts):
            _splat_spheres(zbuf, cam_pts, rope.radius, intr)
        mask = np.isfinite(zbuf)
        depth = np.where(mask, np.round(zbuf * 1000.0) / 1000.0, 0.0)
        out.append((BinaryMask(mask), DepthMap(depth)))
    return out
