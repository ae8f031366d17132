/** Wire types for the teleop service: JSON text frames over websocket.
 *  Field names mirror the server schema exactly.
 */

export type Mode = "PT" | "VA" | "SA_LB" | "SA_CBF";
export type Arm = "left" | "right";

export interface PoseWire {
  pos: number[];   // [x, y, z] meters, task frame
  quat: number[];  // [w, x, y, z]
}

export interface ArmStateWire {
  cmd_pose: PoseWire;
  robot_pose: PoseWire;
  ghost_pose: PoseWire | null;
  engaged: boolean;
  h: number | null;
  gripper_closed: boolean;
  grasped: boolean;
}

export interface BarrierParamsWire {
  z0: number;
  zeta: number;
  sigma: number;
  eps: number;
}

export interface MetricsWire {
  ticks: number;
  pre_grasp_displacement: number;
  min_barrier_value: number | null;
  grasp_achieved: boolean;
  success: boolean;
}

export interface StateUpdate {
  type: "state";
  tick: number;
  mode: Mode;
  arms: ArmStateWire[];
  rope: number[][];
  dlo_fine: number[][];
  barrier: BarrierParamsWire;
  metrics: MetricsWire;
  session: string;
  seq: number;
}

export interface CommandMsg {
  type: "command";
  arm: Arm;
  pos: number[];
  quat: number[];
  t_client_ms: number;
  session: string;
  seq: number;
}

export interface GripperMsg {
  type: "gripper";
  arm: Arm;
  closed: boolean;
  session: string;
  seq: number;
}

export interface ModeMsg {
  type: "mode";
  mode: Mode;
  session: string;
  seq: number;
}

export interface ResetMsg {
  type: "reset";
  session: string;
  seq: number;
}

export type ClientMessage = CommandMsg | GripperMsg | ModeMsg | ResetMsg;

export interface AckMsg {
  type: "ack";
  session: string;
  seq: number;
}

export interface ErrorMsg {
  type: "error";
  session: string;
  seq: number;
  detail: string;
}

export type ServerMessage = StateUpdate | AckMsg | ErrorMsg;

export const MODES: Mode[] = ["PT", "VA", "SA_LB", "SA_CBF"];

export function commandMsg(
  arm: Arm,
  pos: [number, number, number],
  quat: [number, number, number, number],
  seq: number,
  session = "",
  tClientMs = Date.now(),
): CommandMsg {
  return { type: "command", arm, pos: [...pos], quat: [...quat], t_client_ms: tClientMs, session, seq };
}

export function gripperMsg(arm: Arm, closed: boolean, seq: number, session = ""): GripperMsg {
  return { type: "gripper", arm, closed, session, seq };
}

export function modeMsg(mode: Mode, seq: number, session = ""): ModeMsg {
  return { type: "mode", mode, session, seq };
}

export function resetMsg(seq: number, session = ""): ResetMsg {
  return { type: "reset", session, seq };
}

const isNum = (x: unknown): x is number => typeof x === "number" && Number.isFinite(x);
const isVec = (x: unknown, n: number): x is number[] =>
  Array.isArray(x) && x.length === n && x.every(isNum);
const isPointList = (x: unknown): x is number[][] =>
  Array.isArray(x) && x.every((p) => isVec(p, 3));

function isPose(x: any): x is PoseWire {
  return x != null && isVec(x.pos, 3) && isVec(x.quat, 4);
}

function isArmState(x: any): x is ArmStateWire {
  return (
    x != null &&
    isPose(x.cmd_pose) &&
    isPose(x.robot_pose) &&
    (x.ghost_pose === null || isPose(x.ghost_pose)) &&
    typeof x.engaged === "boolean" &&
    (x.h === null || isNum(x.h)) &&
    typeof x.gripper_closed === "boolean" &&
    typeof x.grasped === "boolean"
  );
}

export function isStateUpdate(x: any): x is StateUpdate {
  return (
    x != null &&
    x.type === "state" &&
    Number.isInteger(x.tick) &&
    MODES.includes(x.mode) &&
    Array.isArray(x.arms) &&
    x.arms.length === 2 &&
    x.arms.every(isArmState) &&
    isPointList(x.rope) &&
    isPointList(x.dlo_fine) &&
    x.barrier != null &&
    isNum(x.barrier.z0) &&
    isNum(x.barrier.zeta) &&
    isNum(x.barrier.sigma) &&
    isNum(x.barrier.eps) &&
    x.metrics != null &&
    typeof x.session === "string"
  );
}

/** Validate an outgoing message against the wire schema (exact fields). */
export function isValidClientMessage(x: any): x is ClientMessage {
  if (x == null || typeof x.session !== "string" || !Number.isInteger(x.seq)) return false;
  switch (x.type) {
    case "command":
      return (x.arm === "left" || x.arm === "right") && isVec(x.pos, 3) &&
        isVec(x.quat, 4) && isNum(x.t_client_ms);
    case "gripper":
      return (x.arm === "left" || x.arm === "right") && typeof x.closed === "boolean";
    case "mode":
      return MODES.includes(x.mode);
    case "reset":
      return true;
    default:
      return false;
  }
}

export function parseServerMessage(text: string): ServerMessage | null {
  let data: any;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (isStateUpdate(data)) return data;
  if (data?.type === "ack" && typeof data.session === "string") return data as AckMsg;
  if (data?.type === "error" && typeof data.detail === "string") return data as ErrorMsg;
  return null;
}
