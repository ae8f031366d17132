"""Closed-loop scenario runner: sim -> render -> trace -> fuse -> intent ->
filter at a 100 Hz control rate with 10 Hz perception, plus suite execution
and machine-readable metrics.

Runs are deterministic given (scenario, seed); per-tick logs can be replayed
through the command filter to reproduce the commanded pose stream bit-exactly.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assist import ControlMode, ControlState, StepInfo, filter_command
from .errors import AssistDloError
from .fusion import DloState, TimedPointCloud, build_state, to_task_frame
from .geometry import Pose, UnitQuaternion
from .intent import GraspTarget, IntentParams, IntentState, grasp_pose, infer_target
from .ropesim import pre_grasp_displacement, render_views, step
from .scenarios import Scenario, ScriptedOperator, grasp_wrist_height
from .trace import extract_camera_points

ARMS = ("left", "right")
DRIVEN_ARM = 1  # scripted runs drive the right arm
PARKED_POSE = Pose(np.array([1.5, 1.5, 0.8]), UnitQuaternion.identity())

SUCCESS_LIFT = 0.05  # meters a grasped target particle must rise


@dataclass
class RunMetrics:
    success: bool
    completion_time: float
    pre_grasp_displacement: float
    min_barrier_value: float | None
    grasp_achieved: bool
    command_path_length: float

    def csv_cells(self) -> list[str]:
        return [repr(bool(self.success)), repr(self.completion_time),
                repr(self.pre_grasp_displacement),
                "" if self.min_barrier_value is None else repr(self.min_barrier_value),
                repr(bool(self.grasp_achieved)), repr(self.command_path_length)]


CSV_HEADER = ("scenario,mode,rope,seed,success,completion_time,"
              "pre_grasp_displacement,min_barrier_value,grasp_achieved,"
              "command_path_length")


@dataclass
class ArmSlot:
    """Everything the control loop owns for one arm."""

    robot: Pose
    control: ControlState
    intent: IntentState
    human: Pose
    human_vel: np.ndarray
    gripper_closed: bool = False
    target: GraspTarget | None = None
    attached: bool = False
    last_info: StepInfo = field(default_factory=StepInfo)


class Engine:
    """One closed-loop session over a scenario.

    The engine is single-threaded and deterministic; callers (scripted runner
    or the teleop service) inject human commands between ticks.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.mode = scenario.mode
        self.dt = 1.0 / scenario.control_hz
        self.rope, self.target_particle = scenario.build_rope()
        self.rope0 = self.rope
        self.target_z0 = float(self.rope.particles[self.target_particle, 2])
        self.exclude_center = self.rope.particles[self.target_particle].copy()
        self.cameras = scenario.rig.build()
        self.intent_params = IntentParams()
        self.tick = 0
        self.dlo = DloState(np.zeros((0, 3)), np.zeros((0, 3)), 0.0)
        self.perception_epoch = -1
        self._seen_particles: np.ndarray | None = None
        self._cached_clouds: list[np.ndarray] | None = None
        self.arms = [ArmSlot(PARKED_POSE, ControlState.initial(), IntentState(),
                             PARKED_POSE, np.zeros(3)) for _ in ARMS]
        # Metrics.
        self.min_barrier: float | None = None
        self.displacement_at_grasp: float | None = None
        self.command_path = 0.0
        self.success_tick: int | None = None
        self.log_rows: list[dict] = []

    # -- input surface (used by the scripted runner and the service) --------

    def set_human(self, arm: int, pose: Pose, vel: np.ndarray) -> None:
        self.arms[arm].human = pose
        self.arms[arm].human_vel = np.asarray(vel, dtype=np.float64)

    def set_gripper(self, arm: int, closed: bool) -> None:
        self.arms[arm].gripper_closed = closed

    def set_mode(self, mode: ControlMode) -> None:
        self.mode = mode

    # -- perception ----------------------------------------------------------

    def _perceive(self, now: float) -> None:
        moved = (self._seen_particles is None
                 or not np.array_equal(self._seen_particles, self.rope.particles))
        if moved:
            views = render_views(self.rope, self.cameras)
            clouds = []
            for (mask, depth), (intr, _) in zip(views, self.cameras):
                clouds.append(extract_camera_points(mask, None, depth, intr))
            self._cached_clouds = clouds
            self._seen_particles = self.rope.particles.copy()
        clouds = [to_task_frame(TimedPointCloud(c, "camera", now), ext)
                  if len(c) else None
                  for c, (_, ext) in zip(self._cached_clouds, self.cameras)]
        self.dlo = build_state(clouds[0], clouds[1], now)
        self.perception_epoch += 1

    # -- main loop ------------------------------------------------------------

    def tick_once(self) -> None:
        now = self.tick * self.dt
        if self.tick % self.scenario.perception_every == 0:
            self._perceive(now)

        jaw_offset = np.array([0.0, 0.0, self.scenario.gripper.finger_length])
        grippers = []
        events = []
        for ai, slot in enumerate(self.arms):
            if not self.dlo.empty:
                slot.target, slot.intent = infer_target(
                    self.dlo.coarse, slot.human.position,
                    slot.robot.position - jaw_offset, slot.intent,
                    self.intent_params)
            else:
                slot.target = None
            cmd, slot.control, info = filter_command(
                self.mode, slot.human, slot.human_vel, slot.robot, self.dlo,
                slot.target, slot.control, self.scenario.cbf, self.scenario.lb)
            slot.last_info = info
            if ai == DRIVEN_ARM:
                self.command_path += float(np.linalg.norm(
                    cmd.position - slot.robot.position))
                if info.engaged and not slot.attached and info.h is not None:
                    self.min_barrier = info.h if self.min_barrier is None \
                        else min(self.min_barrier, info.h)
            slot.robot = cmd
            grippers.append((cmd, not slot.gripper_closed))

        rope_pre = self.rope
        self.rope = step(self.rope, grippers, self.scenario.sim,
                         self.scenario.gripper)

        for ai, slot in enumerate(self.arms):
            now_attached = self.rope.grasped_index[ai] is not None
            if now_attached and not slot.attached:
                slot.attached = True
                slot.control = slot.control.with_grasp(slot.robot)
                events.append((ai, "grasp"))
                if ai == DRIVEN_ARM and self.displacement_at_grasp is None:
                    self.displacement_at_grasp = pre_grasp_displacement(
                        self.rope0, rope_pre, self.exclude_center,
                        self.scenario.exclusion_radius)
            elif not now_attached and slot.attached:
                slot.attached = False
                slot.control = slot.control.released()
                events.append((ai, "release"))

        if self.success_tick is None and self.arms[DRIVEN_ARM].attached:
            lifted = self.rope.particles[self.target_particle, 2] - self.target_z0
            if lifted >= SUCCESS_LIFT:
                self.success_tick = self.tick

        self._log_tick(events)
        self.tick += 1

    def _log_tick(self, events) -> None:
        slot = self.arms[DRIVEN_ARM]
        row = {
            "type": "tick", "tick": self.tick, "epoch": self.perception_epoch,
            "human": slot.human.position.tolist(),
            "human_quat": [slot.human.orientation.w, slot.human.orientation.x,
                           slot.human.orientation.y, slot.human.orientation.z],
            "vel": slot.human_vel.tolist(),
            "cmd": slot.robot.position.tolist(),
            "cmd_quat": [slot.robot.orientation.w, slot.robot.orientation.x,
                         slot.robot.orientation.y, slot.robot.orientation.z],
            "target": None if slot.target is None else {
                "point": slot.target.source_point.tolist(),
                "tangent": slot.target.tangent.tolist(),
            },
            "engaged": slot.last_info.engaged,
            "h": slot.last_info.h,
            "grasp": ("grasp" in [e for _, e in events]),
            "release": ("release" in [e for _, e in events]),
        }
        self.log_rows.append(row)

    # -- state summaries -----------------------------------------------------

    def current_displacement(self) -> float:
        if self.displacement_at_grasp is not None:
            return self.displacement_at_grasp
        return pre_grasp_displacement(self.rope0, self.rope,
                                      self.exclude_center,
                                      self.scenario.exclusion_radius)

    def metrics(self) -> RunMetrics:
        success = self.success_tick is not None
        completion = (self.success_tick + 1) * self.dt if success \
            else self.scenario.duration_limit
        return RunMetrics(
            success=success,
            completion_time=completion,
            pre_grasp_displacement=self.current_displacement(),
            min_barrier_value=(self.min_barrier
                               if self.mode is ControlMode.SA_CBF else None),
            grasp_achieved=self.arms[DRIVEN_ARM].attached,
            command_path_length=self.command_path,
        )


def run_scenario(scenario: Scenario, out_dir: str | Path | None = None
                 ) -> RunMetrics:
    """Execute one scripted closed-loop run; optionally write the per-tick log."""
    engine = Engine(scenario)
    wrist_z = grasp_wrist_height(scenario)
    script = ScriptedOperator(scenario.operator, scenario,
                              engine.rope.particles[engine.target_particle],
                              wrist_z)
    driven = engine.arms[DRIVEN_ARM]
    driven.robot = Pose(script.start.copy(), UnitQuaternion.identity())
    jaw_offset = np.array([0.0, 0.0, scenario.gripper.finger_length])
    max_ticks = int(round(scenario.duration_limit * scenario.control_hz))
    dlo_log: list[dict] = []
    last_epoch = -1

    try:
        for _ in range(max_ticks):
            jaw = driven.robot.position - jaw_offset
            target_pos = engine.rope.particles[engine.target_particle]
            pose, vel, closed = script.step(jaw, target_pos, driven.attached)
            engine.set_human(DRIVEN_ARM, pose, vel)
            engine.set_gripper(DRIVEN_ARM, closed)
            engine.tick_once()
            if engine.perception_epoch != last_epoch:
                last_epoch = engine.perception_epoch
                dlo_log.append({"type": "dlo", "tick": engine.tick - 1,
                                "epoch": last_epoch,
                                "coarse": engine.dlo.coarse.tolist()})
            if script.done and (engine.success_tick is not None
                                or scenario.operator.name == "breakaway"
                                or not driven.attached):
                break
    except AssistDloError as exc:
        raise type(exc)(f"{exc} (tick {engine.tick})") from exc

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"{scenario.name}_{scenario.mode.value}_{scenario.seed}"
        with open(out_dir / f"{stem}.jsonl", "w") as f:
            meta = {"type": "meta", "scenario": scenario.name,
                    "mode": scenario.mode.value, "rope": scenario.rope_preset,
                    "seed": scenario.seed,
                    "robot0": script.start.tolist(),
                    "robot0_quat": [1.0, 0.0, 0.0, 0.0]}
            f.write(json.dumps(meta) + "\n")
            rows = sorted(dlo_log + engine.log_rows,
                          key=lambda r: (r["tick"], r["type"] != "dlo"))
            for row in rows:
                f.write(json.dumps(row) + "\n")
    return engine.metrics()


def replay_commands(log_path: str | Path, scenario: Scenario) -> list[np.ndarray]:
    """Re-run the command filter over a recorded log; returns the commanded
    positions, which must match the log bit-exactly."""
    state = ControlState.initial()
    robot: Pose | None = None
    dlo = DloState(np.zeros((0, 3)), np.zeros((0, 3)), 0.0)
    out: list[np.ndarray] = []
    with open(log_path) as f:
        for line in f:
            row = json.loads(line)
            if row["type"] == "meta":
                robot = Pose(np.array(row["robot0"]),
                             UnitQuaternion(*row["robot0_quat"]))
            elif row["type"] == "dlo":
                pts = np.asarray(row["coarse"], dtype=np.float64).reshape(-1, 3)
                dlo = DloState(pts, pts, 0.0)
            elif row["type"] == "tick":
                human = Pose(np.array(row["human"]),
                             UnitQuaternion(*row["human_quat"]))
                vel = np.array(row["vel"])
                target = None
                if row["target"] is not None:
                    target = grasp_pose(np.array(row["target"]["point"]),
                                        np.array(row["target"]["tangent"]))
                cmd, state, _ = filter_command(
                    scenario.mode, human, vel, robot, dlo, target, state,
                    scenario.cbf, scenario.lb)
                out.append(cmd.position.copy())
                robot = cmd
                if row["grasp"]:
                    state = state.with_grasp(cmd)
                if row["release"]:
                    state = state.released()
    return out


def default_suite(seeds=(0,)) -> list[Scenario]:
    """4 control modes x 2 ropes x the crossing approach script."""
    out = []
    for mode in ControlMode:
        for rope in ("blue", "red"):
            for seed in seeds:
                out.append(Scenario(name="line-cross", mode=mode,
                                    rope_preset=rope, rope_layout="u-turn",
                                    seed=seed))
    return out


def run_suite(scenarios: list[Scenario], out_dir: str | Path,
              parallel: bool = True) -> dict:
    """Run all scenarios; writes results.csv (fixed column order) and
    summary.json, resilient to per-run failures."""
    if not scenarios:
        raise ValueError("empty scenario list")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(sc: Scenario):
        try:
            return sc, run_scenario(sc, out_dir / "logs"), None
        except Exception as exc:  # noqa: BLE001 - recorded per row
            return sc, None, f"{type(exc).__name__}: {exc}"

    if parallel and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(scenarios))) as pool:
            results = list(pool.map(one, scenarios))
    else:
        results = [one(sc) for sc in scenarios]

    results.sort(key=lambda r: (r[0].name, r[0].mode.value,
                                r[0].rope_preset, r[0].seed))
    lines = [CSV_HEADER]
    summary: dict = {"schema_version": 1, "runs": len(results), "by_mode": {}}
    for sc, metrics, error in results:
        ident = [sc.name, sc.mode.value, sc.rope_preset, str(sc.seed)]
        if error is not None:
            lines.append(",".join(ident + ["ERROR", error.replace(",", ";"),
                                           "", "", "", ""]))
            continue
        lines.append(",".join(ident + metrics.csv_cells()))
        agg = summary["by_mode"].setdefault(sc.mode.value, {
            "runs": 0, "successes": 0, "displacements": [],
            "completion_times": [], "path_lengths": []})
        agg["runs"] += 1
        agg["successes"] += int(metrics.success)
        agg["displacements"].append(metrics.pre_grasp_displacement)
        if metrics.success:
            agg["completion_times"].append(metrics.completion_time)
        agg["path_lengths"].append(metrics.command_path_length)

    for mode, agg in summary["by_mode"].items():
        n = agg["runs"]
        agg["success_rate"] = agg["successes"] / n
        agg["mean_pre_grasp_displacement"] = float(np.mean(agg["displacements"]))
        agg["max_pre_grasp_displacement"] = float(np.max(agg["displacements"]))
        agg["mean_completion_time"] = (float(np.mean(agg["completion_times"]))
                                       if agg["completion_times"] else None)
        agg["mean_command_path_length"] = float(np.mean(agg["path_lengths"]))
        del agg["displacements"], agg["completion_times"], agg["path_lengths"]

    (out_dir / "results.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2,
                                                     sort_keys=True) + "\n")
    return summary
