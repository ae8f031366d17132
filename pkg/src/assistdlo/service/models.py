"""Wire schemas for the teleop service (JSON text frames over websocket).

Every client message carries the session id and a client sequence number;
state updates carry the server tick.
"""
from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field


class CommandMsg(BaseModel):
    type: Literal["command"]
    arm: Literal["left", "right"]
    pos: list[float] = Field(min_length=3, max_length=3)
    quat: list[float] = Field(min_length=4, max_length=4)  # w, x, y, z
    t_client_ms: float = 0.0
    session: str = ""
    seq: int = 0


class GripperMsg(BaseModel):
    type: Literal["gripper"]
    arm: Literal["left", "right"]
    closed: bool
    session: str = ""
    seq: int = 0


class ModeMsg(BaseModel):
    type: Literal["mode"]
    mode: Literal["PT", "VA", "SA_LB", "SA_CBF"]
    session: str = ""
    seq: int = 0


class ResetMsg(BaseModel):
    type: Literal["reset"]
    session: str = ""
    seq: int = 0


ClientMessage = Union[CommandMsg, GripperMsg, ModeMsg, ResetMsg]


class AckMsg(BaseModel):
    type: Literal["ack"] = "ack"
    session: str
    seq: int


class ErrorMsg(BaseModel):
    type: Literal["error"] = "error"
    session: str
    seq: int = -1
    detail: str


class PoseModel(BaseModel):
    pos: list[float]
    quat: list[float]


class ArmStateModel(BaseModel):
    cmd_pose: PoseModel
    robot_pose: PoseModel
    ghost_pose: Optional[PoseModel] = None
    engaged: bool = False
    h: Optional[float] = None
    gripper_closed: bool = False
    grasped: bool = False


class MetricsModel(BaseModel):
    ticks: int
    pre_grasp_displacement: float
    min_barrier_value: Optional[float] = None
    grasp_achieved: bool
    success: bool


class BarrierParamsModel(BaseModel):
    z0: float
    zeta: float
    sigma: float
    eps: float


class StateUpdate(BaseModel):
    type: Literal["state"] = "state"
    tick: int
    mode: str
    arms: list[ArmStateModel]
    rope: list[list[float]]
    dlo_fine: list[list[float]]
    barrier: BarrierParamsModel
    metrics: MetricsModel
    session: str
    seq: int = 0


class HealthModel(BaseModel):
    status: str
    tick: int
    session: str


class ScenarioModel(BaseModel):
    name: str
    mode: str
    rope_preset: str
    rope_layout: str
    duration_limit: float
    seed: int
