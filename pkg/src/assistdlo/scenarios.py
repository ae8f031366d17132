"""Scenario definitions: rope layouts, camera rigs, scripted operators, and
TOML loading.

A scenario pins everything a closed-loop run needs so that identical
(scenario, seed) pairs reproduce byte-identical results. Seeds perturb the
rope placement rigidly and the operator's start pose; strand-to-strand gaps
are preserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .assist import CbfParams, ControlMode, LbParams
from .config import params_from_dict
from .geometry import CameraIntrinsics, Pose, RigidTransform, UnitQuaternion, look_at
from .ropesim import ROPE_PRESETS, GripperSpec, RopeState, SimConfig


def resample_polyline(points: np.ndarray, spacing: float) -> np.ndarray:
    """Resample a polyline at uniform arc-length spacing (endpoints kept)."""
    pts = np.asarray(points, dtype=np.float64)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    n = max(2, int(round(total / spacing)) + 1)
    targets = np.linspace(0.0, total, n)
    out = np.empty((n, pts.shape[1]))
    for d in range(pts.shape[1]):
        out[:, d] = np.interp(targets, s, pts[:, d])
    return out


# Spacing trades sim cost against the attach rule's reach: the gripper may
# close mid-segment over a perceived point, so half the spacing plus the
# jaw-to-centerline vertical gap must stay inside (rope radius + 5 mm).
PARTICLE_SPACING = 0.0125


def layout_straight(radius: float) -> tuple[np.ndarray, int]:
    """0.56 m straight run along x; target near the +x end."""
    xs = np.arange(-0.28, 0.28 + 1e-9, PARTICLE_SPACING)
    pts = np.column_stack([xs, np.zeros(len(xs)), np.full(len(xs), radius)])
    return pts, len(xs) - 5


def layout_u_turn(radius: float, gap: float = 0.045) -> tuple[np.ndarray, int]:
    """Out along +x, U-turn, back along -x at `gap` offset in +y.

    The return strand carries the grasp target, so a straight approach from -y
    must pass over the ungrasped outgoing strand `gap` before reaching it.
    """
    leg = 0.26
    r = gap / 2.0
    way = [(-leg, 0.0)]
    way.append((leg, 0.0))
    for a in np.linspace(-0.5 * math.pi, 0.5 * math.pi, 13):
        way.append((leg + r * math.cos(a), r + r * math.sin(a)))
    way.append((leg, gap))
    way.append((-leg, gap))
    pts2 = resample_polyline(np.array(way), PARTICLE_SPACING)
    pts = np.column_stack([pts2, np.full(len(pts2), radius)])
    d = np.abs(pts[:, 0] - 0.0) + np.abs(pts[:, 1] - gap)
    return pts, int(np.argmin(d))


def layout_overhand_projection(radius: float) -> tuple[np.ndarray, int]:
    """Hand-authored planar approximation of an overhand knot's top-down
    projection (the crossing is flattened onto the table)."""
    t = np.linspace(0.0, 1.0, 200)
    # A loop with a crossing: lemniscate-like arc spliced into a straight run.
    x = -0.30 + 0.60 * t
    y = 0.09 * np.sin(2.0 * math.pi * t) * np.exp(-((t - 0.5) / 0.22) ** 2)
    pts2 = resample_polyline(np.column_stack([x, y]), PARTICLE_SPACING)
    pts = np.column_stack([pts2, np.full(len(pts2), radius)])
    return pts, len(pts) - 4


LAYOUTS = {
    "straight": layout_straight,
    "u-turn": layout_u_turn,
    "overhand-knot-projection": layout_overhand_projection,
}


@dataclass(frozen=True)
class CameraRig:
    """Two fixed oblique cameras covering the table.

    Strand width in pixels gates skeleton integrity: the containment guard
    needs interior pixels, so ropes should project to >= 6 px across.
    """

    width: int = 400
    height: int = 300
    focal: float = 400.0

    def build(self) -> list[tuple[CameraIntrinsics, RigidTransform]]:
        intr = CameraIntrinsics(self.focal, self.focal,
                                self.width / 2.0, self.height / 2.0,
                                self.width, self.height)
        left = look_at(np.array([-0.15, -0.38, 0.62]), np.array([0.0, 0.0, 0.0]))
        right = look_at(np.array([0.15, 0.38, 0.62]), np.array([0.0, 0.0, 0.0]))
        return [(intr, left), (intr, right)]


@dataclass(frozen=True)
class OperatorScriptSpec:
    """Parameters of the scripted operator (a reproducible stand-in for free
    human motion)."""

    name: str = "straight-line-to-target"
    approach_z: float = 0.095       # cruise wrist height during the approach
    speed: float = 0.12             # m/s along scripted paths
    start_offset: tuple = (0.0, -0.22)  # planar offset from the target at start
    lateral_offset: float = 0.05    # used by offset-approach
    hover_height: float = 0.0       # extra height above grasp level at path end
    lift_height: float = 0.10
    grasp_patience: float = 1.0     # close anyway after this long at path end
    reverse_after: float = 0.12     # breakaway: retreat once this close (m)


OPERATOR_SCRIPTS = ("straight-line-to-target", "hover-descend",
                    "breakaway", "offset-approach")


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: ControlMode = ControlMode.SA_CBF
    rope_preset: str = "blue"
    rope_layout: str = "u-turn"
    operator: OperatorScriptSpec = field(default_factory=OperatorScriptSpec)
    duration_limit: float = 15.0
    seed: int = 0
    rig: CameraRig = field(default_factory=CameraRig)
    sim: SimConfig = field(default_factory=SimConfig)
    gripper: GripperSpec = field(default_factory=GripperSpec)
    cbf: CbfParams = field(default_factory=CbfParams)
    lb: LbParams = field(default_factory=LbParams)
    exclusion_radius: float = 0.035  # displacement metric ignores this ball
    control_hz: int = 100
    perception_every: int = 10       # control ticks per perception update
    explicit_particles: np.ndarray | None = None
    explicit_target: int | None = None

    def __post_init__(self):
        if self.duration_limit <= 0:
            raise ValueError("duration limit must be positive")
        if self.rope_preset not in ROPE_PRESETS:
            raise ValueError(f"unknown rope preset: {self.rope_preset}")
        if self.explicit_particles is None and self.rope_layout not in LAYOUTS:
            raise ValueError(f"unknown layout: {self.rope_layout}")
        if self.operator.name not in OPERATOR_SCRIPTS:
            raise ValueError(f"unknown operator script: {self.operator.name}")

    def build_rope(self) -> tuple[RopeState, int]:
        preset = ROPE_PRESETS[self.rope_preset]
        radius = preset.radius
        if self.explicit_particles is not None:
            pts = np.asarray(self.explicit_particles, dtype=np.float64)
            target = self.explicit_target if self.explicit_target is not None \
                else len(pts) // 2
        else:
            pts, target = LAYOUTS[self.rope_layout](radius)
        rng = np.random.default_rng(self.seed)
        angle = rng.uniform(-0.06, 0.06)
        shift = rng.uniform(-0.004, 0.004, size=2)
        rot = np.array([[math.cos(angle), -math.sin(angle)],
                        [math.sin(angle), math.cos(angle)]])
        pts = pts.copy()
        pts[:, :2] = pts[:, :2] @ rot.T + shift
        spacing = float(np.linalg.norm(pts[1] - pts[0]))
        return RopeState.from_positions(pts, spacing, radius), target

    def start_jitter(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed + 7919)
        return np.concatenate([rng.uniform(-0.005, 0.005, size=2), [0.0]])


class ScriptedOperator:
    """Phase-machine operator: approach, grasp, lift, hold.

    Emits the human wrist command and the jaw request each tick, reacting to
    the observed jaw position and attachment the way an operator watching the
    scene would.
    """

    def __init__(self, spec: OperatorScriptSpec, scenario: Scenario,
                 target_particle: np.ndarray, grasp_wrist_z: float):
        self.spec = spec
        self.dt = 1.0 / scenario.control_hz
        self.target = target_particle.copy()
        jitter = scenario.start_jitter()
        goal_z = grasp_wrist_z + spec.hover_height
        if spec.name == "hover-descend":
            start_xy = self.target[:2]
        elif spec.name == "offset-approach":
            start_xy = self.target[:2] + np.array([spec.lateral_offset,
                                                   spec.start_offset[1]])
        else:
            start_xy = self.target[:2] + np.array(spec.start_offset)
        self.start = np.array([start_xy[0], start_xy[1], spec.approach_z]) + jitter
        if spec.name == "offset-approach":
            # The operator aims beside the strand; the funnel must correct it.
            goal_xy = self.target[:2] + np.array([spec.lateral_offset, 0.0])
        else:
            goal_xy = self.target[:2]
        self.goal = np.array([goal_xy[0], goal_xy[1], goal_z])
        self.pos = self.start.copy()
        self.prev_pos = self.start.copy()
        self.phase = "approach"
        self.phase_time = 0.0
        self.close_requested = False
        self.lift_base: np.ndarray | None = None
        self.done = False

    def _advance_towards(self, goal: np.ndarray, speed: float) -> bool:
        delta = goal - self.pos
        dist = float(np.linalg.norm(delta))
        step = speed * self.dt
        if dist <= step:
            self.pos = goal.copy()
            return True
        self.pos = self.pos + delta * (step / dist)
        return False

    def step(self, jaw_center: np.ndarray, target_pos: np.ndarray,
             attached: bool) -> tuple[Pose, np.ndarray, bool]:
        """Advance one tick; returns (human pose, human velocity, jaw closed)."""
        self.prev_pos = self.pos.copy()
        spec = self.spec
        self.phase_time += self.dt

        if self.phase == "approach":
            arrived = self._advance_towards(self.goal, spec.speed)
            if spec.name == "breakaway":
                if float(np.linalg.norm(self.pos - self.goal)) <= spec.reverse_after:
                    self.phase, self.phase_time = "retreat-rise", 0.0
            elif arrived:
                self.phase, self.phase_time = "grasp", 0.0
        elif self.phase == "retreat-rise":
            top = np.array([self.pos[0], self.pos[1], 0.135])
            if self._advance_towards(top, 0.3):
                self.phase, self.phase_time = "retreat-back", 0.0
        elif self.phase == "retreat-back":
            back = np.array([self.start[0], self.start[1], 0.135])
            if self._advance_towards(back, spec.speed):
                self.phase, self.phase_time = "hold", 0.0
                self.done = True
        elif self.phase == "grasp":
            near = float(np.linalg.norm(jaw_center - target_pos))
            if not self.close_requested and \
                    (near <= 0.011 or self.phase_time >= spec.grasp_patience):
                self.close_requested = True
            if attached:
                self.phase, self.phase_time = "lift", 0.0
                self.lift_base = self.pos.copy()
            elif self.phase_time >= spec.grasp_patience + 2.0:
                self.phase, self.phase_time = "hold", 0.0  # give up
        elif self.phase == "lift":
            up = self.lift_base + np.array([0.0, 0.0, spec.lift_height + 0.02])
            if self._advance_towards(up, 0.1):
                self.phase, self.phase_time = "hold", 0.0
        elif self.phase == "hold":
            if self.phase_time >= 0.5:
                self.done = True

        vel = (self.pos - self.prev_pos) / self.dt
        pose = Pose(self.pos.copy(), UnitQuaternion.identity())
        return pose, vel, self.close_requested


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    sc = dict(data.get("scenario", data))
    op_src = dict(sc.pop("operator", {}))
    op = OperatorScriptSpec(**{k: tuple(v) if k == "start_offset" else v
                               for k, v in op_src.items()})
    cbf, lb = params_from_dict(data)
    kwargs = {}
    for key in ("name", "rope_preset", "rope_layout", "duration_limit", "seed",
                "exclusion_radius", "control_hz", "perception_every"):
        if key in sc:
            kwargs[key] = sc[key]
    if "mode" in sc:
        kwargs["mode"] = ControlMode(sc["mode"])
    if "particles" in sc:
        kwargs["explicit_particles"] = np.asarray(sc["particles"], dtype=np.float64)
        kwargs["explicit_target"] = sc.get("target_particle")
    kwargs.setdefault("name", name)
    return Scenario(operator=op, cbf=cbf, lb=lb, **kwargs)


def load_scenario(path: str | Path) -> Scenario:
    with open(path, "rb") as f:
        data = tomllib.load(f)
    return scenario_from_dict(data, name=Path(path).stem)


def grasp_wrist_height(scenario: Scenario) -> float:
    """Wrist height whose jaw center sits at the resting rope centerline."""
    radius = ROPE_PRESETS[scenario.rope_preset].radius
    return scenario.sim.table_z + radius + scenario.gripper.finger_length
