/** Scene construction: a pure function from (latest state update, console UI
 *  state) to a draw list, plus a thin canvas painter. Keeping the scene a
 *  value makes the render rules testable: everything drawn must originate
 *  from a state_update field, PT shows no point-set overlay or ghost, and the
 *  side-view rope is hidden outside assisted modes (the 2-D camera-feed
 *  handicap of the unassisted baseline).
 */
import { barrierHeight, crossSection } from "./barrier.js";
import type { StateUpdate } from "./messages.js";
import { ViewMapping, type ViewKind } from "./viewport.js";

export interface ConsoleUiState {
  connected: boolean;
  selectedArm: 0 | 1;
  overlayToggled: boolean; // VA overlay forced on regardless of mode
}

export type DrawOp =
  | { kind: "points"; view: ViewKind; role: string; points: number[][]; radiusM: number; color: string }
  | { kind: "polyline"; view: ViewKind; role: string; points: number[][]; color: string; width: number }
  | { kind: "marker"; view: ViewKind; role: string; at: number[]; color: string; label?: string }
  | { kind: "text"; role: string; text: string }
  | { kind: "banner"; role: string; text: string };

const ARM_COLORS = ["#4a90d9", "#e2a33d"];
const OVERLAY_MODES = new Set(["VA", "SA_LB", "SA_CBF"]);
const GHOST_MODES = new Set(["SA_LB", "SA_CBF"]);

export function buildScene(state: StateUpdate | null, ui: ConsoleUiState): DrawOp[] {
  const ops: DrawOp[] = [];
  if (!ui.connected || state === null) {
    ops.push({ kind: "banner", role: "reconnect", text: "connection lost - reconnecting" });
    if (state === null) return ops;
  }

  const overlayOn = OVERLAY_MODES.has(state.mode) || ui.overlayToggled;

  // The top-down rope is the stand-in for the camera feed: always drawn.
  ops.push({ kind: "points", view: "top", role: "rope", points: state.rope, radiusM: 0.006, color: "#888" });
  // Depth information (side view rope, fine overlay) only with assistance.
  if (overlayOn) {
    ops.push({ kind: "points", view: "side", role: "rope", points: state.rope, radiusM: 0.006, color: "#888" });
    for (const view of ["top", "side"] as ViewKind[]) {
      ops.push({ kind: "points", view, role: "dlo_fine", points: state.dlo_fine, radiusM: 0.002, color: "#2faa4a" });
    }
  }

  state.arms.forEach((arm, i) => {
    const color = ARM_COLORS[i];
    for (const view of ["top", "side"] as ViewKind[]) {
      ops.push({
        kind: "marker", view, role: `gripper${i}`, at: arm.cmd_pose.pos, color,
        label: i === ui.selectedArm ? "*" : undefined,
      });
      if (arm.ghost_pose !== null && GHOST_MODES.has(state.mode)) {
        ops.push({ kind: "marker", view, role: `ghost${i}`, at: arm.ghost_pose.pos, color: "#cf5ad9" });
      }
    }
  });

  const active = state.arms[ui.selectedArm];
  if (state.mode === "SA_CBF" && active.engaged) {
    const section = crossSection(
      active.cmd_pose.pos[0], active.cmd_pose.pos[1], 1, 0, 0.12, 61,
      state.dlo_fine.map((p) => [p[0], p[1]]), state.barrier);
    ops.push({
      kind: "polyline", view: "side", role: "funnel",
      points: section.map(([x, , zb]) => [x, 0, zb + state.barrier.eps]),
      color: "#d1495b", width: 1.5,
    });
  }
  if (active.h !== null) {
    ops.push({ kind: "text", role: "h-readout", text: `h = ${active.h.toFixed(4)} m` });
  }
  ops.push({
    kind: "text", role: "status",
    text: `${state.mode} tick ${state.tick} arm ${ui.selectedArm === 0 ? "left" : "right"}`
      + (active.grasped ? " [grasped]" : active.gripper_closed ? " [closed]" : ""),
  });
  return ops;
}

/** Paint a draw list onto the two canvases. */
export function paint(
  top: CanvasRenderingContext2D,
  side: CanvasRenderingContext2D,
  ops: DrawOp[],
  mappings: { top: ViewMapping; side: ViewMapping },
): void {
  for (const [kind, ctx] of [["top", top], ["side", side]] as const) {
    ctx.fillStyle = "#14161a";
    ctx.fillRect(0, 0, mappings[kind].widthPx, mappings[kind].heightPx);
  }
  const statusLines: string[] = [];
  for (const op of ops) {
    if (op.kind === "text") {
      statusLines.push(op.text);
      continue;
    }
    if (op.kind === "banner") {
      for (const ctx of [top, side]) {
        ctx.fillStyle = "rgba(60,60,60,0.55)";
        ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
        ctx.fillStyle = "#f0d060";
        ctx.font = "14px monospace";
        ctx.fillText(op.text, 12, 22);
      }
      continue;
    }
    const ctx = op.view === "top" ? top : side;
    const map = mappings[op.view];
    if (op.kind === "points") {
      ctx.fillStyle = op.color;
      const r = Math.max(1.5, map.metersToPx(op.radiusM));
      for (const p of op.points) {
        const [u, v] = map.toCanvas(p);
        ctx.beginPath();
        ctx.arc(u, v, r, 0, 2 * Math.PI);
        ctx.fill();
      }
    } else if (op.kind === "polyline") {
      ctx.strokeStyle = op.color;
      ctx.lineWidth = op.width;
      ctx.beginPath();
      op.points.forEach((p, i) => {
        const [u, v] = map.toCanvas(p);
        if (i === 0) ctx.moveTo(u, v);
        else ctx.lineTo(u, v);
      });
      ctx.stroke();
    } else if (op.kind === "marker") {
      const [u, v] = map.toCanvas(op.at);
      ctx.strokeStyle = op.color;
      ctx.lineWidth = 2;
      ctx.strokeRect(u - 6, v - 6, 12, 12);
      if (op.label) {
        ctx.fillStyle = op.color;
        ctx.font = "12px monospace";
        ctx.fillText(op.label, u + 8, v - 8);
      }
    }
  }
  top.fillStyle = "#d7dae0";
  top.font = "13px monospace";
  statusLines.forEach((line, i) => top.fillText(line, 10, 18 + 16 * i));
}

export { barrierHeight };
