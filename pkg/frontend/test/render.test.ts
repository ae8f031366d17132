import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { barrierHeight, crossSection } from "../src/barrier.js";
import type { Mode, StateUpdate } from "../src/messages.js";
import { buildScene } from "../src/render.js";

const here = dirname(fileURLToPath(import.meta.url));
const recorded: StateUpdate = readFileSync(join(here, "fixtures", "session.jsonl"), "utf8")
  .trim()
  .split("\n")
  .map((l) => JSON.parse(l))
  .filter((r) => r.side === "server" && r.msg.type === "state")
  .map((r) => r.msg)
  .pop();

function withMode(mode: Mode): StateUpdate {
  return { ...recorded, mode };
}

const ui = { connected: true, selectedArm: 1 as const, overlayToggled: false };

describe("render gating", () => {
  it("PT draws no point-set overlay and no ghost", () => {
    const ops = buildScene(withMode("PT"), ui);
    expect(ops.some((o) => o.kind === "points" && o.role === "dlo_fine")).toBe(false);
    expect(ops.some((o) => o.kind === "marker" && o.role.startsWith("ghost"))).toBe(false);
    // the top-down camera stand-in is still there
    expect(ops.some((o) => o.kind === "points" && o.role === "rope" && o.view === "top")).toBe(true);
    // and the side-view rope (depth information) is hidden
    expect(ops.some((o) => o.kind === "points" && o.role === "rope" && o.view === "side")).toBe(false);
  });

  it("VA draws the fine point-set overlay in both views", () => {
    const ops = buildScene(withMode("VA"), ui);
    const views = ops.filter((o) => o.kind === "points" && o.role === "dlo_fine")
      .map((o: any) => o.view);
    expect(views.sort()).toEqual(["side", "top"]);
  });

  it("the overlay toggle reveals depth info even in PT", () => {
    const ops = buildScene(withMode("PT"), { ...ui, overlayToggled: true });
    expect(ops.some((o) => o.kind === "points" && o.role === "dlo_fine")).toBe(true);
  });

  it("SA_CBF with an engaged arm draws the funnel section and h readout", () => {
    const state = withMode("SA_CBF");
    state.arms = state.arms.map((a, i) =>
      i === 1 ? { ...a, engaged: true, h: 0.0321 } : a) as any;
    const ops = buildScene(state, ui);
    expect(ops.some((o) => o.kind === "polyline" && o.role === "funnel")).toBe(true);
    const readout = ops.find((o) => o.kind === "text" && o.role === "h-readout") as any;
    expect(readout.text).toContain("0.0321");
  });

  it("disconnect produces the reconnect banner", () => {
    const ops = buildScene(recorded, { ...ui, connected: false });
    expect(ops.some((o) => o.kind === "banner" && o.role === "reconnect")).toBe(true);
  });

  it("never invents state: every drawn point comes from the update", () => {
    const state = withMode("SA_CBF");
    const pool = new Set<string>();
    for (const p of [...state.rope, ...state.dlo_fine]) pool.add(p.join(","));
    for (const arm of state.arms) {
      pool.add(arm.cmd_pose.pos.join(","));
      if (arm.ghost_pose) pool.add(arm.ghost_pose.pos.join(","));
    }
    for (const op of buildScene(state, ui)) {
      if (op.kind === "points") {
        for (const p of op.points) expect(pool.has(p.join(","))).toBe(true);
      } else if (op.kind === "marker") {
        expect(pool.has(op.at.join(","))).toBe(true);
      }
    }
  });
});

describe("barrier display math", () => {
  const params = { z0: 0.1, zeta: 0.02, sigma: 0.02, eps: 0.02 };

  it("matches the funnel formula", () => {
    const pts = [[0, 0]];
    expect(barrierHeight(1.0, 1.0, pts, params)).toBeCloseTo(0.1, 9);
    expect(barrierHeight(0, 0, pts, params)).toBeCloseTo(0.08, 12);
    expect(barrierHeight(0.02, 0, pts, params)).toBeCloseTo(
      0.1 - 0.02 * Math.exp(-0.5), 12);
  });

  it("cross-section is symmetric about a single funnel", () => {
    const section = crossSection(0, 0, 1, 0, 0.1, 41, [[0, 0]], params);
    const zs = section.map(([, , z]) => z);
    for (let i = 0; i < zs.length; i++) {
      expect(zs[i]).toBeCloseTo(zs[zs.length - 1 - i], 12);
    }
    expect(Math.min(...zs)).toBeCloseTo(0.08, 12);
  });
});
