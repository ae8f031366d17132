"""Command filters: passthrough, sigmoid linear blending, and the
barrier-constrained shared-autonomy filter with its QP safety layer.

The barrier is a height field over the workspace: a nominal clearance plane
with Gaussian funnels sunk over every observed rope point. The safety value
h = z - z_b(x, y) - eps is kept non-negative by a tiny quadratic program that
projects the desired velocity onto a halfspace-and-box feasible set.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .fusion import DloState
from .geometry import Pose, UnitQuaternion, Vec3, slerp
from .intent import GraspTarget


class ControlMode(str, enum.Enum):
    PT = "PT"          # pure teleoperation
    VA = "VA"          # visual assistance only; commands pass through
    SA_LB = "SA_LB"    # sigmoid linear blending toward the inferred target
    SA_CBF = "SA_CBF"  # barrier-filtered shared autonomy


@dataclass(frozen=True)
class CbfParams:
    """Barrier and QP parameters. Defaults follow the reference tuning."""

    z0: float = 0.10              # nominal clearance height above the table
    zeta: float = 0.02            # funnel depth (max allowable penetration)
    sigma: float = 0.02           # funnel radial width
    eps: float = 0.02             # strict minimal safety margin
    gamma: float = 100.0          # linear class-K gain
    beta: float = 20.0            # cubic class-K gain
    v_max: float = 0.2            # per-axis velocity cap, m/s
    eps_engage: float = 0.3       # engagement radius around the target
    breakaway_speed: float = 0.005  # human-speed gate for input amplification
    orient_weight: float = 0.1    # SLERP interpolation weight scale
    dt: float = 0.01              # control period, s

    def __post_init__(self):
        vals = (self.z0, self.zeta, self.sigma, self.eps, self.gamma, self.beta,
                self.v_max, self.eps_engage, self.breakaway_speed,
                self.orient_weight, self.dt)
        if any(v <= 0 for v in vals):
            raise ValueError("all barrier parameters must be positive")
        if self.zeta > self.z0:
            raise ValueError("funnel depth must not exceed the clearance height")

    def kappa(self, h: float) -> float:
        """Extended class-K shaping: gamma*h + beta*h^3."""
        return self.gamma * h + self.beta * h**3


@dataclass(frozen=True)
class LbParams:
    """Sigmoid blending constants."""

    h_scale: float = 0.6   # spatial scaling of the interaction range
    c_steep: float = 10.0  # transition steepness
    r_center: float = 0.4  # transition center offset

    def __post_init__(self):
        if self.h_scale <= 0 or self.c_steep <= 0 or not 0 < self.r_center < 1:
            raise ValueError("invalid blending parameters")

    def alpha(self, d: float) -> float:
        """Human weight in [0, 1]; 1 far from the target, ~0 at it."""
        return 1.0 / (1.0 + math.exp(-self.c_steep * (d / self.h_scale - self.r_center)))


@dataclass(frozen=True, eq=False)
class ControlState:
    """Per-arm filter state; single-writer (the control loop owns it)."""

    prev_cmd_orientation: UnitQuaternion
    grasp_pose: Pose | None = None     # set while the gripper holds the rope
    handover_eta: float | None = None  # ramp progress; None when inactive

    @staticmethod
    def initial(orientation: UnitQuaternion | None = None) -> "ControlState":
        return ControlState(orientation or UnitQuaternion.identity())

    def with_grasp(self, pose: Pose) -> "ControlState":
        """Arm the handover at the exact commanded pose of the grasp moment."""
        return replace(self, grasp_pose=pose, handover_eta=0.0)

    def released(self) -> "ControlState":
        return replace(self, grasp_pose=None, handover_eta=None)


@dataclass(frozen=True, eq=False)
class BarrierField:
    """Height-field barrier induced by the coarse rope state."""

    rope_xy: np.ndarray  # (N, 2) planar projections of the coarse points
    params: CbfParams

    def __post_init__(self):
        xy = np.asarray(self.rope_xy, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "rope_xy", xy)
        if not np.all(np.isfinite(xy)):
            raise ValueError("non-finite rope projections")

    @staticmethod
    def from_state(dlo: DloState, params: CbfParams) -> "BarrierField":
        return BarrierField(dlo.coarse[:, :2] if len(dlo.coarse) else
                            np.zeros((0, 2)), params)

    @property
    def empty(self) -> bool:
        return len(self.rope_xy) == 0


def barrier_height(field: BarrierField, x: float, y: float) -> float:
    """z_b(x, y) = z0 - zeta * exp(-min_i ||(x,y) - p_i||^2 / (2 sigma^2)).

    An empty field degenerates to the flat plane z0.
    """
    p = field.params
    if field.empty:
        return p.z0
    d2 = np.min((field.rope_xy[:, 0] - x) ** 2 + (field.rope_xy[:, 1] - y) ** 2)
    return p.z0 - p.zeta * math.exp(-d2 / (2.0 * p.sigma**2))


def barrier_heights(field: BarrierField, xy: np.ndarray) -> np.ndarray:
    """Vectorized z_b over an (N, 2) query array."""
    p = field.params
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if field.empty:
        return np.full(len(xy), p.z0)
    d2 = np.min(((xy[:, None, :] - field.rope_xy[None, :, :]) ** 2).sum(axis=2), axis=1)
    return p.z0 - p.zeta * np.exp(-d2 / (2.0 * p.sigma**2))


def barrier_value_and_grad(field: BarrierField, pos: Vec3) -> tuple[float, Vec3]:
    """Safety value h = z - z_b(x, y) - eps and a supporting gradient.

    The min over funnels is differentiated through the nearest rope point only
    (a valid subgradient almost everywhere); ties break by cloud order.
    """
    p = field.params
    x, y, z = float(pos[0]), float(pos[1]), float(pos[2])
    if field.empty:
        return z - p.z0 - p.eps, np.array([0.0, 0.0, 1.0])
    d2 = (field.rope_xy[:, 0] - x) ** 2 + (field.rope_xy[:, 1] - y) ** 2
    i = int(np.argmin(d2))
    g = math.exp(-d2[i] / (2.0 * p.sigma**2))
    zb = p.z0 - p.zeta * g
    scale = p.zeta * g / p.sigma**2
    grad = np.array([-scale * (x - field.rope_xy[i, 0]),
                     -scale * (y - field.rope_xy[i, 1]),
                     1.0])
    return z - zb - p.eps, grad


class QpResult(NamedTuple):
    velocity: np.ndarray
    best_effort: bool  # True when box and halfspace do not intersect


def cbf_qp(v_des: Vec3, h: float, grad: Vec3, params: CbfParams) -> QpResult:
    """Exact minimizer of ||v - v_des||^2 subject to grad.v + kappa(h) >= 0 and
    ||v||_inf <= v_max.

    Solved in closed form: v(mu) = clamp(v_des + (mu/2) grad) is the box-QP
    optimum for halfspace multiplier mu, and phi(mu) = grad.v(mu) + kappa is
    piecewise linear and nondecreasing, so the active multiplier is found by a
    breakpoint scan. Infeasible instances return the box point maximizing
    grad.v (free axes keep their clamped desired values) flagged best-effort.
    """
    g = np.asarray(grad, dtype=np.float64)
    vd = np.asarray(v_des, dtype=np.float64)
    vm = params.v_max
    kappa = params.kappa(h)

    v0 = np.clip(vd, -vm, vm)
    if float(g @ v0) + kappa >= 0.0:
        return QpResult(v0, False)

    # Feasibility over the box: the maximizer of g.v sits at the signed corner.
    v_corner = np.where(g > 0, vm, np.where(g < 0, -vm, v0))
    if float(g @ v_corner) + kappa < 0.0:
        return QpResult(v_corner, True)

    # phi(mu) = sum_i g_i * clamp(vd_i + mu g_i / 2) + kappa, nondecreasing.
    # Breakpoints where a component saturates:
    mus = [0.0]
    for i in range(3):
        if g[i] != 0.0:
            for bound in (-vm, vm):
                mu = 2.0 * (bound - vd[i]) / g[i]
                if mu > 0.0:
                    mus.append(mu)
    mus = sorted(set(mus))

    def phi(mu: float) -> float:
        return float(g @ np.clip(vd + 0.5 * mu * g, -vm, vm)) + kappa

    prev = mus[0]
    for mu in mus[1:]:
        if phi(mu) >= 0.0:
            break
        prev = mu
    else:
        mu = None
    if mu is not None and phi(mu) >= 0.0:
        lo, hi = prev, mu
    else:
        lo = mus[-1]
        hi = None  # beyond the last breakpoint phi is linear in mu

    # Solve phi = 0 on the active linear segment analytically.
    probe = lo + 1e-9 if hi is None else 0.5 * (lo + hi)
    active = np.abs(vd + 0.5 * probe * g) < vm
    slope = 0.5 * float((g[active] ** 2).sum())
    if slope <= 0.0:
        mu_star = hi if hi is not None else lo
    else:
        mu_star = lo + (-phi(lo)) / slope
        if hi is not None:
            mu_star = min(mu_star, hi)
    v = np.clip(vd + 0.5 * mu_star * g, -vm, vm)
    return QpResult(v, False)


def desired_velocity(human_vel: Vec3, robot_pos: Vec3, target_pos: Vec3,
                     params: CbfParams) -> Vec3:
    """Nominal velocity inside the engagement zone.

    Sum of the human input and the target attraction (x_a - x_r) / dt; when the
    operator actively pulls away (negative alignment at speed above the gate)
    their input is doubled to grant breakaway authority.
    """
    vh = np.asarray(human_vel, dtype=np.float64)
    v_target = (np.asarray(target_pos, dtype=np.float64)
                - np.asarray(robot_pos, dtype=np.float64)) / params.dt
    if float(vh @ v_target) < 0.0 and np.linalg.norm(vh) > params.breakaway_speed:
        return 2.0 * vh + v_target
    return vh + v_target


@dataclass(frozen=True)
class StepInfo:
    """Diagnostics for logging and the service layer."""

    engaged: bool = False
    h: float | None = None
    best_effort: bool = False
    assistance_available: bool = True
    handover: bool = False


def sa_cbf_step(human: Pose, human_vel: Vec3, robot: Pose, target: GraspTarget,
                field: BarrierField, state: ControlState, params: CbfParams
                ) -> tuple[Pose, ControlState, StepInfo]:
    """One barrier-filtered control step for an ungrasped arm.

    Outside the engagement radius the human pose passes through. Inside, the
    position integrates the QP-filtered velocity from the robot pose and the
    orientation is pulled toward the target yaw by a SLERP whose weight scales
    with proximity. After integration the z component is projected onto the
    barrier surface: the one-step linearization of the constraint admits a
    curvature undershoot of order ||v||^2 dt^2 / sigma^2 when traversing a
    funnel, and the projection removes it without slowing horizontal motion.
    """
    if field.empty:
        new_state = replace(state, prev_cmd_orientation=human.orientation)
        return human, new_state, StepInfo(assistance_available=False)

    d = float(np.linalg.norm(human.position - target.pose.position))
    if d >= params.eps_engage:
        new_state = replace(state, prev_cmd_orientation=human.orientation)
        return human, new_state, StepInfo(engaged=False)

    h, grad = barrier_value_and_grad(field, robot.position)
    v_des = desired_velocity(human_vel, robot.position, target.pose.position, params)
    # The raw attraction is x/dt-scaled (hundreds of v_max at range); saturate
    # it entering the QP so the projection trades axes at command scale
    # instead of sacrificing all tracking for descent.
    v_des = np.clip(v_des, -params.v_max, params.v_max)
    v_star, best_effort = cbf_qp(v_des, h, grad, params)
    pos = robot.position + v_star * params.dt
    floor = barrier_height(field, pos[0], pos[1]) + params.eps
    if pos[2] < floor:
        pos = np.array([pos[0], pos[1], floor])

    alpha = max(0.0, 1.0 - d / params.eps_engage)
    q = slerp(state.prev_cmd_orientation, target.pose.orientation,
              params.orient_weight * alpha)
    new_state = replace(state, prev_cmd_orientation=q)
    h_cmd, _ = barrier_value_and_grad(field, pos)
    return Pose(pos, q), new_state, StepInfo(engaged=True, h=h_cmd,
                                             best_effort=best_effort)


def sa_lb_step(human: Pose, target: GraspTarget, params: LbParams) -> Pose:
    """Sigmoid linear blending of the human and autonomous target poses.

    alpha weights the human; translation and orientation blend separately,
    with SLERP(q_a, q_h; alpha) per the displayed convention.
    """
    d = float(np.linalg.norm(human.position - target.pose.position))
    alpha = params.alpha(d)
    pos = alpha * human.position + (1.0 - alpha) * target.pose.position
    q = slerp(target.pose.orientation, human.orientation, alpha)
    return Pose(pos, q)


def handover_step(human: Pose, state: ControlState, duration: float, dt: float
                  ) -> tuple[Pose, ControlState]:
    """Post-grasp ramp from the recorded grasp pose back to the raw human pose.

    eta ramps linearly from 0 to 1 over `duration`; at 1 the handover
    deactivates and the arm returns to unconstrained tracking.
    """
    if state.grasp_pose is None or state.handover_eta is None:
        raise ValueError("handover requires an armed grasp pose")
    eta = min(1.0, state.handover_eta + dt / duration)
    pos = (1.0 - eta) * state.grasp_pose.position + eta * human.position
    q = slerp(state.grasp_pose.orientation, human.orientation, eta)
    new_state = replace(state, prev_cmd_orientation=q,
                        handover_eta=None if eta >= 1.0 else eta)
    return Pose(pos, q), new_state


DEFAULT_HANDOVER_DURATION = 1.0  # seconds


def filter_command(mode: ControlMode, human: Pose, human_vel: Vec3, robot: Pose,
                   dlo: DloState, target: GraspTarget | None,
                   state: ControlState, cbf: CbfParams, lb: LbParams,
                   handover_duration: float = DEFAULT_HANDOVER_DURATION
                   ) -> tuple[Pose, ControlState, StepInfo]:
    """Dispatch one control tick through the active filter."""
    if mode in (ControlMode.PT, ControlMode.VA):
        new_state = replace(state, prev_cmd_orientation=human.orientation)
        return human, new_state, StepInfo()

    if mode is ControlMode.SA_LB:
        if target is None or dlo.empty:
            new_state = replace(state, prev_cmd_orientation=human.orientation)
            return human, new_state, StepInfo(assistance_available=False)
        pose = sa_lb_step(human, target, lb)
        return pose, replace(state, prev_cmd_orientation=pose.orientation), \
            StepInfo(engaged=True)

    if mode is ControlMode.SA_CBF:
        if state.grasp_pose is not None:
            if state.handover_eta is not None:
                pose, new_state = handover_step(human, state,
                                                handover_duration, cbf.dt)
                return pose, new_state, StepInfo(handover=True)
            new_state = replace(state, prev_cmd_orientation=human.orientation)
            return human, new_state, StepInfo()
        if target is None or dlo.empty:
            new_state = replace(state, prev_cmd_orientation=human.orientation)
            return human, new_state, StepInfo(assistance_available=False)
        field = BarrierField.from_state(dlo, cbf)
        return sa_cbf_step(human, human_vel, robot, target, field, state, cbf)

    raise ValueError(f"unknown control mode: {mode}")
